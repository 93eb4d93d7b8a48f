#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/rng.hpp"

namespace wellspec {

namespace detail {

inline double normal_sf(double z) { return 0.5 * std::erfc(z / 1.41421356237309504880168872420970); }

inline double lchoose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
// continued fraction otherwise (Numerical Recipes style).
inline double incomplete_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// HSIC with Gaussian kernels and median-heuristic bandwidths
// ---------------------------------------------------------------------------

struct HsicResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n_permutations = 0;
    double bandwidth_eps = 1.0;
    double bandwidth_x = 1.0;
    std::size_t n_used = 0;  // rows entering the test after any subsampling
};

enum class HsicCalibration { kPermutation, kGamma };

struct HsicOptions {
    std::size_t n_perm = 500;
    // Rows are deterministically subsampled down to this count before
    // testing; 0 disables the cap.
    std::size_t max_n = 1024;
    HsicCalibration calibration = HsicCalibration::kPermutation;
};

// K_il = exp(-|v_i - v_l|^2 / (2 sigma^2)), sigma = median of the nonzero
// pairwise distances; all-equal rows give sigma = 1 and an all-ones matrix.
inline Matrix gaussian_gram(const Matrix& v, double* bandwidth_out = nullptr) {
    const std::size_t n = v.rows;
    if (n < 2) throw std::invalid_argument("gaussian_gram: need n >= 2");
    Matrix k(n, n);  // holds squared distances first, kernel values after
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = 0.0;
        for (std::size_t l = i + 1; l < n; ++l) {
            const double d = squared_distance(v.row(i), v.row(l), v.cols);
            k(i, l) = d;
            k(l, i) = d;
            if (d > 0.0) dist.push_back(std::sqrt(d));
        }
    }
    double sigma = 1.0;
    if (!dist.empty()) {
        const std::size_t m = dist.size();
        std::nth_element(dist.begin(), dist.begin() + m / 2, dist.end());
        sigma = dist[m / 2];
        if (m % 2 == 0) {
            const double lo = *std::max_element(dist.begin(), dist.begin() + m / 2);
            sigma = 0.5 * (lo + sigma);
        }
    }
    if (bandwidth_out) *bandwidth_out = sigma;
    const double inv = -1.0 / (2.0 * sigma * sigma);
    for (std::size_t i = 0; i < n * n; ++i) k.data[i] = std::exp(k.data[i] * inv);
    return k;
}

namespace detail {

// In-place double centering: K <- H K H with H = I - (1/n) 11'.
inline void center_gram(Matrix& k) {
    const std::size_t n = k.rows;
    std::vector<double> rowmean(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k(i, j);
        rowmean[i] = s / static_cast<double>(n);
        total += s;
    }
    total /= static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k(i, j) += total - rowmean[i] - rowmean[j];
}

inline double hsic_from_grams(const Matrix& centered_eps, const Matrix& kx) {
    const std::size_t n = centered_eps.rows;
    double acc = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) acc += centered_eps.data[i] * kx.data[i];
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

// The permutation loop runs on single-precision copies of the centered
// grams: it is memory bound, and the observed statistic is computed through
// the identical float path so exceedance comparisons stay consistent.
inline double hsic_permuted(const std::vector<float>& centered_eps, const std::vector<float>& kx,
                            std::size_t n, const std::vector<std::uint32_t>& perm) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float* arow = centered_eps.data() + static_cast<std::size_t>(perm[i]) * n;
        const float* brow = kx.data() + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            a0 += static_cast<double>(arow[perm[j]]) * brow[j];
            a1 += static_cast<double>(arow[perm[j + 1]]) * brow[j + 1];
            a2 += static_cast<double>(arow[perm[j + 2]]) * brow[j + 2];
            a3 += static_cast<double>(arow[perm[j + 3]]) * brow[j + 3];
        }
        for (; j < n; ++j) a0 += static_cast<double>(arow[perm[j]]) * brow[j];
    }
    return (a0 + a1 + a2 + a3) / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace detail

// Biased V-statistic (1/n^2) trace(K_eps H K_x H).
inline double hsic_stat(const std::vector<double>& eps, const Matrix& x) {
    if (eps.size() != x.rows) throw std::invalid_argument("hsic_stat: size mismatch");
    if (eps.size() < 4) throw std::invalid_argument("hsic_stat: need n >= 4");
    Matrix ke = gaussian_gram(Matrix::from_column(eps));
    const Matrix kx = gaussian_gram(x);
    detail::center_gram(ke);
    return detail::hsic_from_grams(ke, kx);
}

// Permutation test: eps is permuted, x stays fixed,
// p = (1 + #{permuted stat >= observed}) / (n_perm + 1).
inline HsicResult hsic_perm_test(const std::vector<double>& eps, const Matrix& x,
                                 std::size_t n_perm, const RngStream& rng,
                                 const HsicOptions& options = {}) {
    if (eps.size() != x.rows) throw std::invalid_argument("hsic_perm_test: size mismatch");
    if (eps.size() < 4) throw std::invalid_argument("hsic_perm_test: need n >= 4");
    if (options.calibration == HsicCalibration::kPermutation && n_perm < 19)
        throw std::invalid_argument("hsic_perm_test: need n_perm >= 19");

    std::vector<double> e = eps;
    Matrix xs = x;
    if (options.max_n > 0 && eps.size() > options.max_n) {
        RngStream sub_rng = rng.child(1);
        std::vector<std::size_t> keep = sub_rng.sample_without_replacement(eps.size(), options.max_n);
        std::sort(keep.begin(), keep.end());
        e = select(eps, keep);
        xs = x.select_rows(keep);
    }
    const std::size_t n = e.size();

    HsicResult res;
    res.n_used = n;
    Matrix ke = gaussian_gram(Matrix::from_column(e), &res.bandwidth_eps);
    Matrix kx = gaussian_gram(xs, &res.bandwidth_x);

    if (options.calibration == HsicCalibration::kGamma) {
        // Gamma moment matching for the permutation null of n * HSIC_b.
        const double nd = static_cast<double>(n);
        double sum_e = 0.0, sum_x = 0.0;
        for (std::size_t i = 0; i < n * n; ++i) {
            sum_e += ke.data[i];
            sum_x += kx.data[i];
        }
        const double mu_e = (sum_e - nd) / (nd * (nd - 1.0));
        const double mu_x = (sum_x - nd) / (nd * (nd - 1.0));
        const double mean_h = (1.0 + mu_e * mu_x - mu_e - mu_x) / nd;
        detail::center_gram(ke);
        detail::center_gram(kx);
        res.statistic = detail::hsic_from_grams(ke, kx);
        double b_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double t = ke(i, j) * kx(i, j);
                b_sum += t * t;
            }
        const double var_h = 2.0 * (nd - 4.0) * (nd - 5.0) / (nd * (nd - 1.0) * (nd - 2.0) * (nd - 3.0)) *
                             b_sum / (nd * (nd - 1.0));
        res.n_permutations = 0;
        if (mean_h <= 0.0 || var_h <= 0.0) {
            res.p_value = 1.0;
            return res;
        }
        const double shape = mean_h * mean_h / var_h;
        const double scale = nd * var_h / mean_h;
        res.p_value = std::max(1.0 - detail::incomplete_gamma_p(shape, nd * res.statistic / scale),
                               std::numeric_limits<double>::min());
        return res;
    }

    detail::center_gram(ke);
    res.statistic = detail::hsic_from_grams(ke, kx);
    res.n_permutations = n_perm;

    std::vector<float> kef(n * n), kxf(n * n);
    for (std::size_t i = 0; i < n * n; ++i) {
        kef[i] = static_cast<float>(ke.data[i]);
        kxf[i] = static_cast<float>(kx.data[i]);
    }
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
    const double observed = detail::hsic_permuted(kef, kxf, n, perm);

    const RngStream perm_rng = rng.child(0);
    std::size_t exceed = 0;
    for (std::size_t k = 0; k < n_perm; ++k) {
        RngStream r = perm_rng.child(k);
        for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[r.below(i)]);
        if (detail::hsic_permuted(kef, kxf, n, perm) >= observed) ++exceed;
    }
    res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
    return res;
}

// ---------------------------------------------------------------------------
// Multisplit p-value aggregation
// ---------------------------------------------------------------------------

struct AggregatedPValue {
    double p0 = 1.0;
    double gamma_min = 0.05;
    std::vector<double> per_split;
};

// Q(gamma) = min(1, empirical gamma-quantile of {p_b / gamma});
// p0 = min(1, (1 - ln gamma_min) inf_{gamma in [gamma_min, 1]} Q(gamma)).
// Q is piecewise p_(m)/gamma on gamma in ((m-1)/K, m/K], decreasing within
// each piece, so the infimum is attained on the right endpoints m/K.
inline AggregatedPValue aggregate_pvalues(const std::vector<double>& per_split, double gamma_min = 0.05) {
    if (per_split.empty()) throw std::invalid_argument("aggregate_pvalues: no p-values");
    if (!(gamma_min > 0.0 && gamma_min < 1.0))
        throw std::invalid_argument("aggregate_pvalues: gamma_min must be in (0,1)");
    for (double p : per_split)
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("aggregate_pvalues: p-values must be in (0,1]");

    const std::size_t k = per_split.size();
    std::vector<double> sorted(per_split);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m0 = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma_min * static_cast<double>(k) - 1e-12)));
    double inf_q = 1.0;
    for (std::size_t m = m0; m <= k; ++m) {
        const double gamma = static_cast<double>(m) / static_cast<double>(k);
        inf_q = std::min(inf_q, std::min(1.0, sorted[m - 1] / gamma));
    }
    AggregatedPValue out;
    out.gamma_min = gamma_min;
    out.per_split = per_split;
    out.p0 = std::min(1.0, (1.0 - std::log(gamma_min)) * inf_q);
    return out;
}

// ---------------------------------------------------------------------------
// Fisher's exact test (one-sided) and the Mann-Whitney U test
// ---------------------------------------------------------------------------

// One-sided p-value for H_A: success rate of group 1 < rate of group 2, from
// the hypergeometric law of the 2x2 table [[k1, trials-k1], [k2, trials-k2]].
inline double fisher_exact_less(std::size_t k1, std::size_t k2, std::size_t trials) {
    if (k1 > trials || k2 > trials) throw std::invalid_argument("fisher_exact_less: counts exceed trials");
    const double n = static_cast<double>(2 * trials);
    const double kk = static_cast<double>(k1 + k2);
    const double draws = static_cast<double>(trials);
    const double denom = detail::lchoose(n, draws);
    const std::size_t lo = k1 + k2 > trials ? k1 + k2 - trials : 0;
    double p = 0.0;
    for (std::size_t x = lo; x <= k1; ++x) {
        const double xd = static_cast<double>(x);
        p += std::exp(detail::lchoose(kk, xd) + detail::lchoose(n - kk, draws - xd) - denom);
    }
    return std::min(p, 1.0);
}

namespace detail {

// U statistic of a over b with 0.5 credit for ties.
inline double mwu_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> bs(b);
    std::sort(bs.begin(), bs.end());
    double u = 0.0;
    for (double v : a) {
        const std::size_t below = static_cast<std::size_t>(std::lower_bound(bs.begin(), bs.end(), v) - bs.begin());
        const std::size_t upto = static_cast<std::size_t>(std::upper_bound(bs.begin(), bs.end(), v) - bs.begin());
        u += static_cast<double>(below) + 0.5 * static_cast<double>(upto - below);
    }
    return u;
}

}  // namespace detail

// Two-sided Mann-Whitney U p-value. Exact enumeration over all group
// assignments when |a| + |b| <= 20, otherwise the normal approximation with
// tie correction and continuity correction.
inline double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
    const std::size_t na = a.size(), nb = b.size(), ntot = na + nb;
    const double u_obs = detail::mwu_statistic(a, b);

    if (ntot <= 20) {
        std::vector<double> pool(a);
        pool.insert(pool.end(), b.begin(), b.end());
        std::vector<std::size_t> comb(na);
        for (std::size_t i = 0; i < na; ++i) comb[i] = i;
        std::size_t total = 0, le = 0, ge = 0;
        std::vector<double> ga(na), gb(nb);
        while (true) {
            std::vector<bool> in_a(ntot, false);
            for (std::size_t i : comb) in_a[i] = true;
            std::size_t ia = 0, ib = 0;
            for (std::size_t i = 0; i < ntot; ++i) (in_a[i] ? ga[ia++] : gb[ib++]) = pool[i];
            const double u = detail::mwu_statistic(ga, gb);
            ++total;
            if (u <= u_obs + 1e-9) ++le;
            if (u >= u_obs - 1e-9) ++ge;
            // next combination in lexicographic order
            std::size_t i = na;
            while (i > 0 && comb[i - 1] == ntot - na + i - 1) --i;
            if (i == 0) break;
            ++comb[i - 1];
            for (std::size_t j = i; j < na; ++j) comb[j] = comb[j - 1] + 1;
        }
        const double pl = static_cast<double>(le) / static_cast<double>(total);
        const double pg = static_cast<double>(ge) / static_cast<double>(total);
        return std::min(1.0, 2.0 * std::min(pl, pg));
    }

    const double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    std::vector<double> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    std::sort(pool.begin(), pool.end());
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < ntot;) {
        std::size_t j = i + 1;
        while (j < ntot && pool[j] == pool[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    const double nn = static_cast<double>(ntot);
    const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                       (nn + 1.0 - tie_sum / (nn * (nn - 1.0)));
    if (var <= 0.0) return 1.0;
    const double z = (std::fabs(u_obs - mu) - 0.5) / std::sqrt(var);
    if (z <= 0.0) return 1.0;
    return std::min(1.0, 2.0 * detail::normal_sf(z));
}

}  // namespace wellspec
