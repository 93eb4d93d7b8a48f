#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/kdtree.hpp"
#include "wellspec/rng.hpp"

namespace wellspec {

// Self-inclusive rank counts: r[i] = #{l : v_l <= v_i}, l[i] = #{l : v_l >= v_i}.
struct RankVector {
    std::vector<int> r;
    std::vector<int> l;
    std::size_t n() const { return r.size(); }
};

struct NeighborMap {
    std::vector<int> m;        // m[i] != i, a Euclidean nearest neighbor of row i
    std::uint64_t tie_seed = 0;  // master seed of the stream that resolved ties
};

enum class NnMethod { kAuto, kBruteForce, kKdTree };

// Exceeding this row count switches the auto method to the k-d tree.
inline constexpr std::size_t kBruteForceMaxN = 2000;

inline RankVector ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("ranks: empty input");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("ranks: non-finite input");
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    RankVector rv;
    rv.r.resize(n);
    rv.l.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rv.r[i] = static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin());
        rv.l[i] = static_cast<int>(n - (std::lower_bound(sorted.begin(), sorted.end(), values[i]) - sorted.begin()));
    }
    return rv;
}

namespace detail {

// Draw uniformly among the (ascending) minimizers; per-row child streams keep
// the draw independent of evaluation order.
inline int resolve_tie(const std::vector<int>& minimizers, const RngStream& tie_rng, std::size_t row) {
    if (minimizers.size() == 1) return minimizers[0];
    RngStream r = tie_rng.child(row);
    return minimizers[static_cast<std::size_t>(r.below(minimizers.size()))];
}

inline void nn_one_dim(const Matrix& x, const RngStream& tie_rng, std::vector<int>& m) {
    const std::size_t n = x.rows;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x.data[a] < x.data[b]; });

    // group boundaries of equal values in sorted order
    std::vector<std::size_t> group_of(n);
    std::vector<std::size_t> group_begin, group_end;
    for (std::size_t s = 0; s < n;) {
        std::size_t e = s + 1;
        while (e < n && x.data[order[e]] == x.data[order[s]]) ++e;
        for (std::size_t t = s; t < e; ++t) group_of[order[t]] = group_begin.size();
        group_begin.push_back(s);
        group_end.push_back(e);
        s = e;
    }

    std::vector<int> minimizers;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const int i = order[pos];
        const std::size_t g = group_of[i];
        minimizers.clear();
        if (group_end[g] - group_begin[g] > 1) {
            for (std::size_t t = group_begin[g]; t < group_end[g]; ++t)
                if (order[t] != i) minimizers.push_back(order[t]);
            std::sort(minimizers.begin(), minimizers.end());
        } else {
            const double v = x.data[i];
            double dl = std::numeric_limits<double>::infinity();
            double dr = dl;
            if (g > 0) {
                const double u = x.data[order[group_begin[g - 1]]];
                dl = (v - u) * (v - u);
            }
            if (g + 1 < group_begin.size()) {
                const double u = x.data[order[group_begin[g + 1]]];
                dr = (u - v) * (u - v);
            }
            const double best = std::min(dl, dr);
            if (dl == best)
                for (std::size_t t = group_begin[g - 1]; t < group_end[g - 1]; ++t) minimizers.push_back(order[t]);
            if (dr == best)
                for (std::size_t t = group_begin[g + 1]; t < group_end[g + 1]; ++t) minimizers.push_back(order[t]);
            std::sort(minimizers.begin(), minimizers.end());
        }
        m[static_cast<std::size_t>(i)] = resolve_tie(minimizers, tie_rng, static_cast<std::size_t>(i));
    }
}

inline void nn_brute(const Matrix& x, const RngStream& tie_rng, std::vector<int>& m) {
    const std::size_t n = x.rows;
    std::vector<int> minimizers;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        minimizers.clear();
        const double* xi = x.row(i);
        for (std::size_t l = 0; l < n; ++l) {
            if (l == i) continue;
            const double d2 = squared_distance(xi, x.row(l), x.cols);
            if (d2 < best) {
                best = d2;
                minimizers.clear();
                minimizers.push_back(static_cast<int>(l));
            } else if (d2 == best) {
                minimizers.push_back(static_cast<int>(l));
            }
        }
        m[i] = resolve_tie(minimizers, tie_rng, i);
    }
}

inline void nn_kdtree(const Matrix& x, const RngStream& tie_rng, std::vector<int>& m) {
    const KdTree tree(x);
    std::vector<int> minimizers;
    for (std::size_t i = 0; i < x.rows; ++i) {
        tree.min_distance_set(x.row(i), static_cast<int>(i), minimizers);
        m[i] = resolve_tie(minimizers, tie_rng, i);
    }
}

}  // namespace detail

// Euclidean nearest neighbor per row. Exact distance ties, including
// duplicate rows, are resolved by a uniform draw among all minimizers.
inline NeighborMap nearest_neighbors(const Matrix& x, const RngStream& rng,
                                     NnMethod method = NnMethod::kAuto) {
    const std::size_t n = x.rows;
    if (n < 2) throw std::invalid_argument("nearest_neighbors: need n >= 2");
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("nearest_neighbors: non-finite input");
    NeighborMap nn;
    nn.tie_seed = rng.master_seed();
    nn.m.resize(n);
    if (method == NnMethod::kAuto) {
        if (x.cols == 1) {
            detail::nn_one_dim(x, rng, nn.m);
            return nn;
        }
        method = n <= kBruteForceMaxN ? NnMethod::kBruteForce : NnMethod::kKdTree;
    }
    if (method == NnMethod::kBruteForce)
        detail::nn_brute(x, rng, nn.m);
    else
        detail::nn_kdtree(x, rng, nn.m);
    return nn;
}

// ---------------------------------------------------------------------------
// Dependence statistics. All numerators are exact int64 sums; a single final
// division produces the returned value.
//
//   Q_n        = (1/n^2) sum_i [ min{R_i, R_M(i)} - L_i^2 / n ]
//   S_n (cond) = (1/n^2) sum_i [ R_i - min{R_i, R_M(i)} ]
//   S_n (unc)  = (1/n^3) sum_i L_i (n - L_i)
// ---------------------------------------------------------------------------

inline void check_sizes(const RankVector& y_ranks, const NeighborMap& nn) {
    if (y_ranks.n() != nn.m.size())
        throw std::invalid_argument("rank vector and neighbor map have different sizes");
}

inline std::int64_t codec_q_numerator(const RankVector& y_ranks, const NeighborMap& nn) {
    check_sizes(y_ranks, nn);
    const std::int64_t n = static_cast<std::int64_t>(y_ranks.n());
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < y_ranks.n(); ++i) {
        const std::int64_t r = y_ranks.r[i];
        const std::int64_t rm = y_ranks.r[static_cast<std::size_t>(nn.m[i])];
        const std::int64_t l = y_ranks.l[i];
        acc += n * std::min(r, rm) - l * l;
    }
    return acc;  // divide by n^3 for Q_n
}

inline std::int64_t codec_s_conditional_numerator(const RankVector& y_ranks, const NeighborMap& nn) {
    check_sizes(y_ranks, nn);
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < y_ranks.n(); ++i)
        acc += y_ranks.r[i] - std::min(y_ranks.r[i], y_ranks.r[static_cast<std::size_t>(nn.m[i])]);
    return acc;  // divide by n^2
}

inline std::int64_t codec_s_unconditional_numerator(const RankVector& y_ranks) {
    const std::int64_t n = static_cast<std::int64_t>(y_ranks.n());
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < y_ranks.n(); ++i)
        acc += static_cast<std::int64_t>(y_ranks.l[i]) * (n - y_ranks.l[i]);
    return acc;  // divide by n^3
}

inline double codec_q(const RankVector& y_ranks, const NeighborMap& nn) {
    const double n = static_cast<double>(y_ranks.n());
    return static_cast<double>(codec_q_numerator(y_ranks, nn)) / (n * n * n);
}

inline double codec_s_conditional(const RankVector& y_ranks, const NeighborMap& nn) {
    const double n = static_cast<double>(y_ranks.n());
    return static_cast<double>(codec_s_conditional_numerator(y_ranks, nn)) / (n * n);
}

inline double codec_s_unconditional(const RankVector& y_ranks) {
    if (y_ranks.n() < 2) throw std::invalid_argument("codec_s_unconditional: need n >= 2");
    const double n = static_cast<double>(y_ranks.n());
    return static_cast<double>(codec_s_unconditional_numerator(y_ranks)) / (n * n * n);
}

struct DependenceStat {
    double q_n = 0.0;
    double s_n = 0.0;
    double t_n = 0.0;
    bool defined = false;  // false when S_n = 0 (e.g. constant response)
};

// Dependence coefficient of y on x_u. Without a baseline this is the
// unconditional coefficient T_n = Q_n / S_n with the unconditional
// normalizer. With a baseline it is the conditional coefficient: both
// neighbor maps enter, M over [baseline x_u] and N over the baseline alone:
//
//   T_n = sum_i [min{R_i, R_M(i)} - min{R_i, R_N(i)}] / sum_i [R_i - min{R_i, R_N(i)}]
inline DependenceStat codec_t(const std::vector<double>& y, const Matrix& x_u, const RngStream& rng,
                              const Matrix* conditional_baseline = nullptr) {
    if (y.size() != x_u.rows) throw std::invalid_argument("codec_t: size mismatch");
    const RankVector rv = ranks(y);
    const double n = static_cast<double>(y.size());
    DependenceStat out;
    if (conditional_baseline == nullptr) {
        const NeighborMap nn = nearest_neighbors(x_u, rng.child(0));
        const std::int64_t qnum = codec_q_numerator(rv, nn);
        const std::int64_t snum = codec_s_unconditional_numerator(rv);
        out.q_n = static_cast<double>(qnum) / (n * n * n);
        out.s_n = static_cast<double>(snum) / (n * n * n);
        out.defined = snum != 0;
        out.t_n = out.defined ? static_cast<double>(qnum) / static_cast<double>(snum) : 0.0;
        return out;
    }
    if (conditional_baseline->rows != x_u.rows)
        throw std::invalid_argument("codec_t: baseline size mismatch");
    Matrix joint(x_u.rows, conditional_baseline->cols + x_u.cols);
    for (std::size_t i = 0; i < x_u.rows; ++i) {
        for (std::size_t j = 0; j < conditional_baseline->cols; ++j) joint(i, j) = (*conditional_baseline)(i, j);
        for (std::size_t j = 0; j < x_u.cols; ++j) joint(i, conditional_baseline->cols + j) = x_u(i, j);
    }
    const NeighborMap m_joint = nearest_neighbors(joint, rng.child(0));
    const NeighborMap m_base = nearest_neighbors(*conditional_baseline, rng.child(1));
    std::int64_t qnum = 0, snum = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const int r = rv.r[i];
        const int mn_joint = std::min(r, rv.r[static_cast<std::size_t>(m_joint.m[i])]);
        const int mn_base = std::min(r, rv.r[static_cast<std::size_t>(m_base.m[i])]);
        qnum += mn_joint - mn_base;
        snum += r - mn_base;
    }
    out.q_n = static_cast<double>(qnum) / (n * n);
    out.s_n = static_cast<double>(snum) / (n * n);
    out.defined = snum != 0;
    out.t_n = out.defined ? static_cast<double>(qnum) / static_cast<double>(snum) : 0.0;
    return out;
}

enum class GMode { kAbsolute, kIdentity };

inline std::vector<double> transform_g(const std::vector<double>& eps, GMode mode) {
    for (double v : eps)
        if (!std::isfinite(v)) throw std::invalid_argument("transform_g: non-finite input");
    if (mode == GMode::kIdentity) return eps;
    std::vector<double> out(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) out[i] = std::fabs(eps[i]);
    return out;
}

struct FociOptions {
    bool standardize = false;  // per-column (x - mean)/sd before distances
};

struct FociResult {
    std::vector<int> selected;  // selection order
    bool undefined = false;     // constant response, statistic undefined
};

namespace detail {

inline Matrix standardized(const Matrix& x) {
    Matrix out = x;
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= static_cast<double>(x.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double d = x(i, j) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(x.rows));
        if (sd > 0.0)
            for (std::size_t i = 0; i < x.rows; ++i) out(i, j) = (x(i, j) - mean) / sd;
    }
    return out;
}

}  // namespace detail

// Greedy forward selection maximizing Q_n of the augmented set. The
// unconditional normalizer does not depend on the candidate, so maximizing
// T_n and maximizing Q_n coincide, and comparing exact integer numerators
// makes tie handling deterministic (lowest index wins). Candidate set S u {j}
// at step k uses the tie stream rng.child(k).child(j).
inline FociResult foci_select(const std::vector<double>& y, const Matrix& x, const RngStream& rng,
                              const FociOptions& options = {}) {
    const std::size_t n = y.size();
    const std::size_t p = x.cols;
    if (x.rows != n) throw std::invalid_argument("foci_select: size mismatch");
    if (n < 2 || p < 1) throw std::invalid_argument("foci_select: need n >= 2 and p >= 1");
    FociResult res;
    const RankVector rv = ranks(y);
    if (codec_s_unconditional_numerator(rv) == 0) {
        res.undefined = true;
        return res;
    }
    const Matrix xwork = options.standardize ? detail::standardized(x) : x;

    std::vector<bool> in_set(p, false);
    std::int64_t current_qnum = 0;  // Q numerator of the selected set; empty set contributes 0
    std::vector<int> cols;
    for (std::size_t step = 0; step < p; ++step) {
        std::int64_t best_qnum = std::numeric_limits<std::int64_t>::min();
        int best_j = -1;
        for (std::size_t j = 0; j < p; ++j) {
            if (in_set[j]) continue;
            cols.assign(res.selected.begin(), res.selected.end());
            cols.push_back(static_cast<int>(j));
            const Matrix sub = xwork.select_cols(cols);
            const NeighborMap nn = nearest_neighbors(sub, rng.child(step).child(j));
            const std::int64_t qnum = codec_q_numerator(rv, nn);
            if (qnum > best_qnum) {  // strict: ties keep the lowest index
                best_qnum = qnum;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j < 0 || best_qnum <= current_qnum) break;
        res.selected.push_back(best_j);
        in_set[static_cast<std::size_t>(best_j)] = true;
        current_qnum = best_qnum;
    }
    return res;
}

}  // namespace wellspec
