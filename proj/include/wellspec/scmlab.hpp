#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/regress.hpp"
#include "wellspec/rng.hpp"
#include "wellspec/tabular.hpp"

namespace wellspec {

// ---------------------------------------------------------------------------
// DAG and d-separation
// ---------------------------------------------------------------------------

struct Dag {
    std::vector<std::string> names;
    std::vector<std::pair<int, int>> edges;  // from -> to

    int size() const { return static_cast<int>(names.size()); }

    int index_of(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (names[static_cast<std::size_t>(i)] == name) return i;
        throw input_error("unknown node name: " + name);
    }

    std::vector<std::vector<int>> parents() const {
        std::vector<std::vector<int>> pa(static_cast<std::size_t>(size()));
        for (auto& e : edges) pa[static_cast<std::size_t>(e.second)].push_back(e.first);
        return pa;
    }

    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> ch(static_cast<std::size_t>(size()));
        for (auto& e : edges) ch[static_cast<std::size_t>(e.first)].push_back(e.second);
        return ch;
    }

    // Topological order; empty when the edge set has a cycle.
    std::vector<int> topological_order() const {
        const auto pa = parents();
        std::vector<int> indeg(static_cast<std::size_t>(size()), 0);
        for (int i = 0; i < size(); ++i) indeg[static_cast<std::size_t>(i)] = static_cast<int>(pa[static_cast<std::size_t>(i)].size());
        const auto ch = children();
        std::deque<int> q;
        for (int i = 0; i < size(); ++i)
            if (indeg[static_cast<std::size_t>(i)] == 0) q.push_back(i);
        std::vector<int> order;
        while (!q.empty()) {
            const int v = q.front();
            q.pop_front();
            order.push_back(v);
            for (int c : ch[static_cast<std::size_t>(v)])
                if (--indeg[static_cast<std::size_t>(c)] == 0) q.push_back(c);
        }
        if (static_cast<int>(order.size()) != size()) order.clear();
        return order;
    }

    bool is_acyclic() const { return !names.empty() && !topological_order().empty(); }
};

// Standard active-trail reachability: A and B are d-separated given C when no
// element of B is reachable from A along a trail that C leaves active.
inline bool d_separated(const Dag& dag, const std::vector<int>& a, const std::vector<int>& b,
                        const std::vector<int>& c) {
    const int q = dag.size();
    auto check = [&](const std::vector<int>& s) {
        for (int v : s)
            if (v < 0 || v >= q) throw input_error("d_separated: node index out of range");
    };
    check(a);
    check(b);
    check(c);
    std::vector<bool> in_a(static_cast<std::size_t>(q)), in_b(static_cast<std::size_t>(q)), in_c(static_cast<std::size_t>(q));
    for (int v : a) in_a[static_cast<std::size_t>(v)] = true;
    for (int v : b) in_b[static_cast<std::size_t>(v)] = true;
    for (int v : c) in_c[static_cast<std::size_t>(v)] = true;
    for (int v = 0; v < q; ++v)
        if ((in_a[static_cast<std::size_t>(v)] && (in_b[static_cast<std::size_t>(v)] || in_c[static_cast<std::size_t>(v)])) ||
            (in_b[static_cast<std::size_t>(v)] && in_c[static_cast<std::size_t>(v)]))
            throw input_error("d_separated: A, B, C must be disjoint");

    const auto pa = dag.parents();
    const auto ch = dag.children();

    // ancestors of C, including C
    std::vector<bool> anc_c(static_cast<std::size_t>(q), false);
    std::deque<int> work;
    for (int v : c) {
        anc_c[static_cast<std::size_t>(v)] = true;
        work.push_back(v);
    }
    while (!work.empty()) {
        const int v = work.front();
        work.pop_front();
        for (int p : pa[static_cast<std::size_t>(v)])
            if (!anc_c[static_cast<std::size_t>(p)]) {
                anc_c[static_cast<std::size_t>(p)] = true;
                work.push_back(p);
            }
    }

    // (node, direction) BFS; direction 0 = trail arrives from a child ("up"),
    // 1 = trail arrives from a parent ("down")
    std::vector<std::array<bool, 2>> visited(static_cast<std::size_t>(q), {false, false});
    std::deque<std::pair<int, int>> frontier;
    for (int v : a) frontier.emplace_back(v, 0);
    while (!frontier.empty()) {
        auto [v, dir] = frontier.front();
        frontier.pop_front();
        if (visited[static_cast<std::size_t>(v)][static_cast<std::size_t>(dir)]) continue;
        visited[static_cast<std::size_t>(v)][static_cast<std::size_t>(dir)] = true;
        if (!in_c[static_cast<std::size_t>(v)] && in_b[static_cast<std::size_t>(v)]) return false;
        if (dir == 0) {
            if (!in_c[static_cast<std::size_t>(v)]) {
                for (int p : pa[static_cast<std::size_t>(v)]) frontier.emplace_back(p, 0);
                for (int x : ch[static_cast<std::size_t>(v)]) frontier.emplace_back(x, 1);
            }
        } else {
            if (!in_c[static_cast<std::size_t>(v)])
                for (int x : ch[static_cast<std::size_t>(v)]) frontier.emplace_back(x, 1);
            if (anc_c[static_cast<std::size_t>(v)])
                for (int p : pa[static_cast<std::size_t>(v)]) frontier.emplace_back(p, 0);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Structural causal model specification
// ---------------------------------------------------------------------------

struct EdgeTerm {
    enum class Kind { kPowerSign, kLinear, kSin };
    int parent = -1;
    Kind kind = Kind::kLinear;
    // power-sign: a1 |x|^b1 sign(x) + a2 |x|^b2
    double a1 = 0.0, b1 = 1.0, a2 = 0.0, b2 = 1.0;
    double coef = 1.0;            // linear
    double amp = 1.0, freq = 1.0;  // sin
    double scale = 1.0;            // the term is divided by this

    double eval(double x) const {
        double v = 0.0;
        switch (kind) {
            case Kind::kPowerSign:
                v = a1 * std::pow(std::fabs(x), b1) * (x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0) +
                    a2 * std::pow(std::fabs(x), b2);
                break;
            case Kind::kLinear:
                v = coef * x;
                break;
            case Kind::kSin:
                v = amp * std::sin(freq * x);
                break;
        }
        return v / scale;
    }
};

struct Mechanism {
    enum class Kind { kAdditiveNoise, kScaledParent };
    Kind kind = Kind::kAdditiveNoise;
    std::vector<EdgeTerm> terms;  // additive contributions, one per incoming edge
    // kScaledParent: value = (g0 + |z_scale_parent|) * z_factor_parent + noise
    int scale_parent = -1;
    int factor_parent = -1;
    double g0 = 0.5;
    // eligibility flag for the graphical ground truth (A2/A2'-style separability)
    bool separable = true;
};

struct NoiseLaw {
    enum class Kind { kNormal, kUniform, kLaplace };
    Kind kind = Kind::kNormal;
    double variance = 1.0;

    double sample(RngStream& rng) const {
        if (variance <= 0.0) return 0.0;
        switch (kind) {
            case Kind::kNormal:
                return std::sqrt(variance) * rng.normal();
            case Kind::kUniform: {
                const double a = std::sqrt(3.0 * variance);
                return rng.uniform(-a, a);
            }
            case Kind::kLaplace:
                return rng.laplace(std::sqrt(variance / 2.0));
        }
        return 0.0;
    }
};

struct ScmSpec {
    Dag dag;
    std::vector<Mechanism> mechanisms;  // one per node
    std::vector<NoiseLaw> noise;        // one per node
    std::vector<int> observed;          // M, node indices; excludes the target
    int target = -1;

    void validate() const {
        const int q = dag.size();
        if (q == 0) throw input_error("scm: no nodes");
        if (static_cast<int>(mechanisms.size()) != q || static_cast<int>(noise.size()) != q)
            throw input_error("scm: mechanisms/noise must match node count");
        for (auto& e : dag.edges)
            if (e.first < 0 || e.first >= q || e.second < 0 || e.second >= q || e.first == e.second)
                throw input_error("scm: bad edge");
        if (!dag.is_acyclic()) throw input_error("scm: graph is not acyclic");
        if (target < 0 || target >= q) throw input_error("scm: bad target");
        const auto pa = dag.parents();
        for (int v = 0; v < q; ++v) {
            const auto& mech = mechanisms[static_cast<std::size_t>(v)];
            const auto& par = pa[static_cast<std::size_t>(v)];
            auto is_parent = [&](int u) { return std::find(par.begin(), par.end(), u) != par.end(); };
            if (mech.kind == Mechanism::Kind::kAdditiveNoise) {
                for (auto& t : mech.terms)
                    if (!is_parent(t.parent))
                        throw input_error("scm: mechanism of '" + dag.names[static_cast<std::size_t>(v)] +
                                          "' references a non-parent");
            } else {
                if (!is_parent(mech.scale_parent) || !is_parent(mech.factor_parent))
                    throw input_error("scm: scaled mechanism of '" + dag.names[static_cast<std::size_t>(v)] +
                                      "' references a non-parent");
            }
        }
        for (int m : observed) {
            if (m < 0 || m >= q) throw input_error("scm: observed index out of range");
            if (m == target) throw input_error("scm: target cannot be observed as a predictor");
        }
    }
};

struct SampleResult {
    Dataset data;                          // observed predictors X_M and target y
    Matrix hidden;                         // columns for nodes outside M u {target}
    std::vector<std::string> hidden_names;
    Matrix node_values;                    // all node columns, simulation order = node order
    std::vector<double> target_noise;      // the target's own structural noise draw
};

// Ancestral sampling in topological order. Node j's noise comes from
// rng.child(j), so draws do not depend on evaluation order.
inline SampleResult sample_scm(const ScmSpec& spec, std::size_t n, const RngStream& rng) {
    spec.validate();
    const int q = spec.dag.size();
    const std::vector<int> order = spec.dag.topological_order();

    Matrix vals(n, static_cast<std::size_t>(q));
    SampleResult out;
    out.target_noise.resize(n);
    for (int v : order) {
        RngStream node_rng = rng.child(static_cast<std::uint64_t>(v));
        const Mechanism& mech = spec.mechanisms[static_cast<std::size_t>(v)];
        for (std::size_t i = 0; i < n; ++i) {
            const double eps = spec.noise[static_cast<std::size_t>(v)].sample(node_rng);
            double val = eps;
            if (mech.kind == Mechanism::Kind::kAdditiveNoise) {
                for (const auto& t : mech.terms) val += t.eval(vals(i, static_cast<std::size_t>(t.parent)));
            } else {
                val += (mech.g0 + std::fabs(vals(i, static_cast<std::size_t>(mech.scale_parent)))) *
                       vals(i, static_cast<std::size_t>(mech.factor_parent));
            }
            vals(i, static_cast<std::size_t>(v)) = val;
            if (v == spec.target) out.target_noise[i] = eps;
        }
    }

    out.data.target_name = spec.dag.names[static_cast<std::size_t>(spec.target)];
    out.data.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.data.y[i] = vals(i, static_cast<std::size_t>(spec.target));
    out.data.x = Matrix(n, spec.observed.size());
    for (std::size_t j = 0; j < spec.observed.size(); ++j) {
        out.data.names.push_back(spec.dag.names[static_cast<std::size_t>(spec.observed[j])]);
        for (std::size_t i = 0; i < n; ++i) out.data.x(i, j) = vals(i, static_cast<std::size_t>(spec.observed[j]));
    }
    std::vector<int> hidden_idx;
    for (int v = 0; v < q; ++v) {
        if (v == spec.target) continue;
        if (std::find(spec.observed.begin(), spec.observed.end(), v) != spec.observed.end()) continue;
        hidden_idx.push_back(v);
    }
    out.hidden = Matrix(n, hidden_idx.size());
    for (std::size_t j = 0; j < hidden_idx.size(); ++j) {
        out.hidden_names.push_back(spec.dag.names[static_cast<std::size_t>(hidden_idx[j])]);
        for (std::size_t i = 0; i < n; ++i) out.hidden(i, j) = vals(i, static_cast<std::size_t>(hidden_idx[j]));
    }
    out.node_values = std::move(vals);
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark suites
// ---------------------------------------------------------------------------

// Six-node benchmark: X1 -> X2 -> X3 -> Y, X1 -> Y, Y -> X4, X5 isolated.
// Edge functions a1 |x|^b1 sign(x) + a2 |x|^b2 with per-run random
// parameters, standardized on a pilot sample so that each edge contribution
// has roughly unit variance; noise variance 1 at roots and 1/4 elsewhere,
// laws randomly assigned, two of each kind.
class Fig2Suite {
  public:
    explicit Fig2Suite(std::uint64_t seed) : seed_(seed) {}

    static constexpr int kTargetNode = 5;
    static constexpr std::size_t kPilotSize = 10000;

    // all 3-subsets of {X1..X5} as node indices (target excluded)
    static std::vector<std::vector<int>> observed_subsets() {
        std::vector<std::vector<int>> out;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j)
                for (int k = j + 1; k < 5; ++k) out.push_back({i, j, k});
        return out;
    }

    // The spec for one simulation run; `observed` defaults to all of X1..X5
    // and is typically replaced by one of observed_subsets().
    ScmSpec spec_for_run(std::size_t run) const {
        RngStream rng(seed_, {0xF2u, run});
        ScmSpec spec;
        spec.dag.names = {"X1", "X2", "X3", "X4", "X5", "Y"};
        spec.dag.edges = {{0, 1}, {1, 2}, {0, 5}, {2, 5}, {5, 3}};
        spec.target = kTargetNode;
        spec.observed = {0, 1, 2, 3, 4};
        spec.mechanisms.resize(6);
        spec.noise.resize(6);

        // roots: X1, X5 (variance 1); the rest 1/4
        for (int v = 0; v < 6; ++v) spec.noise[static_cast<std::size_t>(v)].variance = (v == 0 || v == 4) ? 1.0 : 0.25;
        std::vector<NoiseLaw::Kind> laws = {NoiseLaw::Kind::kNormal,  NoiseLaw::Kind::kNormal,
                                            NoiseLaw::Kind::kUniform, NoiseLaw::Kind::kUniform,
                                            NoiseLaw::Kind::kLaplace, NoiseLaw::Kind::kLaplace};
        RngStream law_rng = rng.child(0);
        law_rng.shuffle(laws);
        for (int v = 0; v < 6; ++v) spec.noise[static_cast<std::size_t>(v)].kind = laws[static_cast<std::size_t>(v)];

        RngStream par_rng = rng.child(1);
        auto random_alpha = [&]() {
            double a;
            do {
                a = par_rng.uniform(-2.0, 2.0);
            } while (std::fabs(a) < 0.2);
            return a;
        };
        for (auto& e : spec.dag.edges) {
            EdgeTerm t;
            t.kind = EdgeTerm::Kind::kPowerSign;
            t.parent = e.first;
            t.a1 = random_alpha();
            t.a2 = random_alpha();
            t.b1 = par_rng.uniform(0.5, 2.0);
            t.b2 = par_rng.uniform(0.5, 2.0);
            spec.mechanisms[static_cast<std::size_t>(e.second)].terms.push_back(t);
        }
        standardize_terms(spec, rng.child(2));
        return spec;
    }

  private:
    // Divide each edge function by its standard deviation on a pilot sample,
    // walking the graph in topological order.
    static void standardize_terms(ScmSpec& spec, const RngStream& pilot_rng) {
        const std::vector<int> order = spec.dag.topological_order();
        Matrix pilot(kPilotSize, static_cast<std::size_t>(spec.dag.size()));
        for (int v : order) {
            RngStream node_rng = pilot_rng.child(static_cast<std::uint64_t>(v));
            Mechanism& mech = spec.mechanisms[static_cast<std::size_t>(v)];
            for (auto& t : mech.terms) {
                double mean = 0.0, m2 = 0.0;
                for (std::size_t i = 0; i < kPilotSize; ++i) {
                    const double u = t.eval(pilot(i, static_cast<std::size_t>(t.parent)));
                    mean += u;
                    m2 += u * u;
                }
                mean /= static_cast<double>(kPilotSize);
                const double var = m2 / static_cast<double>(kPilotSize) - mean * mean;
                if (var > 0.0) t.scale *= std::sqrt(var);
            }
            for (std::size_t i = 0; i < kPilotSize; ++i) {
                double val = spec.noise[static_cast<std::size_t>(v)].sample(node_rng);
                for (const auto& t : mech.terms) val += t.eval(pilot(i, static_cast<std::size_t>(t.parent)));
                pilot(i, static_cast<std::size_t>(v)) = val;
            }
        }
    }

    std::uint64_t seed_;
};

// Four-node heteroscedastic benchmark: H -> X1 (sinusoidal), X1 -> X2
// (linear), Y = (0.5 + |X2|) H; Gaussian noise on X1 and X2, M = {X1, X2}.
struct LsnmSuite {
    static constexpr double kSinFreq = 2.5;
    static constexpr double kNoiseSdX1 = 0.3;
    static constexpr double kNoiseSdX2 = 0.5;
    static constexpr double kG0 = 0.5;

    static ScmSpec make() {
        ScmSpec spec;
        spec.dag.names = {"H", "X1", "X2", "Y"};
        spec.dag.edges = {{0, 1}, {1, 2}, {0, 3}, {2, 3}};
        spec.target = 3;
        spec.observed = {1, 2};
        spec.mechanisms.resize(4);
        spec.noise.resize(4);
        spec.noise[0] = {NoiseLaw::Kind::kNormal, 1.0};
        spec.noise[1] = {NoiseLaw::Kind::kNormal, kNoiseSdX1 * kNoiseSdX1};
        spec.noise[2] = {NoiseLaw::Kind::kNormal, kNoiseSdX2 * kNoiseSdX2};
        spec.noise[3] = {NoiseLaw::Kind::kNormal, 0.0};

        EdgeTerm sin_term;
        sin_term.kind = EdgeTerm::Kind::kSin;
        sin_term.parent = 0;
        sin_term.amp = 1.0;
        sin_term.freq = kSinFreq;
        spec.mechanisms[1].terms.push_back(sin_term);

        EdgeTerm lin_term;
        lin_term.kind = EdgeTerm::Kind::kLinear;
        lin_term.parent = 1;
        lin_term.coef = 1.0;
        spec.mechanisms[2].terms.push_back(lin_term);

        Mechanism& y_mech = spec.mechanisms[3];
        y_mech.kind = Mechanism::Kind::kScaledParent;
        y_mech.scale_parent = 2;
        y_mech.factor_parent = 0;
        y_mech.g0 = kG0;
        return spec;
    }

    // True normalized residual (H - E[H|X1]) / sd(H|X1). H -> X1 -> X2 is a
    // chain, so conditioning on X2 adds nothing; the posterior moments come
    // from a dense grid over H.
    static std::vector<double> true_residuals(const std::vector<double>& x1, const std::vector<double>& h) {
        if (x1.size() != h.size()) throw std::invalid_argument("true_residuals: size mismatch");
        constexpr int kGrid = 3201;
        constexpr double kLim = 8.0;
        static const std::vector<std::array<double, 3>> table = [] {
            std::vector<std::array<double, 3>> t(kGrid);  // h, sin(f h), prior weight
            for (int g = 0; g < kGrid; ++g) {
                const double hv = -kLim + 2.0 * kLim * static_cast<double>(g) / (kGrid - 1);
                t[static_cast<std::size_t>(g)] = {hv, std::sin(kSinFreq * hv), std::exp(-0.5 * hv * hv)};
            }
            return t;
        }();
        std::vector<double> out(x1.size());
        const double inv2s2 = 1.0 / (2.0 * kNoiseSdX1 * kNoiseSdX1);
        for (std::size_t i = 0; i < x1.size(); ++i) {
            double w_sum = 0.0, m1 = 0.0, m2 = 0.0;
            for (const auto& row : table) {
                const double d = x1[i] - row[1];
                const double w = row[2] * std::exp(-d * d * inv2s2);
                w_sum += w;
                m1 += w * row[0];
                m2 += w * row[0] * row[0];
            }
            const double mean = m1 / w_sum;
            const double var = std::max(m2 / w_sum - mean * mean, 1e-12);
            out[i] = (h[i] - mean) / std::sqrt(var);
        }
        return out;
    }
};

inline ScmSpec lsnm_suite(std::uint64_t /*seed*/ = 0) { return LsnmSuite::make(); }

// Fixture DAGs used throughout: hidden confounder (left) and hidden mediator
// (right), with additive mechanisms so the graphical ground truth applies.
inline ScmSpec fig1_left_scm() {
    ScmSpec spec;
    spec.dag.names = {"H", "X1", "X2", "Y"};
    spec.dag.edges = {{0, 1}, {1, 2}, {0, 3}, {2, 3}};
    spec.target = 3;
    spec.observed = {1, 2};
    spec.mechanisms.resize(4);
    spec.noise.resize(4);
    spec.noise[0] = {NoiseLaw::Kind::kNormal, 1.0};
    spec.noise[1] = {NoiseLaw::Kind::kNormal, 0.09};
    spec.noise[2] = {NoiseLaw::Kind::kNormal, 0.25};
    spec.noise[3] = {NoiseLaw::Kind::kNormal, 0.09};
    EdgeTerm h_to_x1;
    h_to_x1.kind = EdgeTerm::Kind::kSin;
    h_to_x1.parent = 0;
    h_to_x1.freq = 2.0;
    spec.mechanisms[1].terms.push_back(h_to_x1);
    EdgeTerm x1_to_x2;
    x1_to_x2.kind = EdgeTerm::Kind::kLinear;
    x1_to_x2.parent = 1;
    spec.mechanisms[2].terms.push_back(x1_to_x2);
    EdgeTerm x2_to_y;
    x2_to_y.kind = EdgeTerm::Kind::kSin;
    x2_to_y.parent = 2;
    x2_to_y.amp = 1.0;
    x2_to_y.freq = 2.0;
    spec.mechanisms[3].terms.push_back(x2_to_y);
    EdgeTerm h_to_y;
    h_to_y.kind = EdgeTerm::Kind::kLinear;
    h_to_y.parent = 0;
    h_to_y.coef = 2.0;  // strong confounding
    spec.mechanisms[3].terms.push_back(h_to_y);
    return spec;
}

inline ScmSpec fig1_right_scm() {
    ScmSpec spec;
    spec.dag.names = {"X1", "X2", "H", "Y"};
    spec.dag.edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
    spec.target = 3;
    spec.observed = {0, 1};
    spec.mechanisms.resize(4);
    spec.noise.resize(4);
    spec.noise[0] = {NoiseLaw::Kind::kNormal, 1.0};
    spec.noise[1] = {NoiseLaw::Kind::kNormal, 0.25};
    spec.noise[2] = {NoiseLaw::Kind::kNormal, 0.25};
    spec.noise[3] = {NoiseLaw::Kind::kNormal, 0.09};
    EdgeTerm x1_to_x2;
    x1_to_x2.kind = EdgeTerm::Kind::kLinear;
    x1_to_x2.parent = 0;
    spec.mechanisms[1].terms.push_back(x1_to_x2);
    EdgeTerm x2_to_h;
    x2_to_h.kind = EdgeTerm::Kind::kSin;
    x2_to_h.parent = 1;
    x2_to_h.freq = 2.0;
    spec.mechanisms[2].terms.push_back(x2_to_h);
    EdgeTerm h_to_y;
    h_to_y.kind = EdgeTerm::Kind::kLinear;
    h_to_y.parent = 2;
    h_to_y.coef = 2.0;
    spec.mechanisms[3].terms.push_back(h_to_y);
    EdgeTerm x1_to_y;
    x1_to_y.kind = EdgeTerm::Kind::kSin;
    x1_to_y.parent = 0;
    x1_to_y.freq = 2.0;
    spec.mechanisms[3].terms.push_back(x1_to_y);
    return spec;
}

// ---------------------------------------------------------------------------
// Graphical ground truth
// ---------------------------------------------------------------------------

struct GroundTruth {
    std::vector<int> w_true;  // observed node indices with well-specified effect
    bool global_ok = false;
};

// Augments the DAG with an explicit exogenous eps_Y -> Y node, then labels
// j in M well-specified when H_PA(Y) u {eps_Y} is d-separated from X_j given
// X_{M \ j}; globally well-specified when the same set is d-separated from
// all of X_M unconditionally.
inline GroundTruth ground_truth_w(const ScmSpec& spec) {
    spec.validate();
    for (const auto& mech : spec.mechanisms)
        if (!mech.separable)
            throw input_error("ground_truth_w: mechanisms are not flagged separable; refusing to label");

    Dag aug = spec.dag;
    const int eps_node = aug.size();
    aug.names.push_back("__eps_target__");
    aug.edges.emplace_back(eps_node, spec.target);

    const auto pa = spec.dag.parents();
    std::vector<int> h_pa = {eps_node};
    for (int p : pa[static_cast<std::size_t>(spec.target)])
        if (std::find(spec.observed.begin(), spec.observed.end(), p) == spec.observed.end()) h_pa.push_back(p);

    GroundTruth gt;
    gt.global_ok = d_separated(aug, h_pa, spec.observed, {});
    for (int j : spec.observed) {
        std::vector<int> rest;
        for (int m : spec.observed)
            if (m != j) rest.push_back(m);
        if (d_separated(aug, h_pa, {j}, rest)) gt.w_true.push_back(j);
    }
    std::sort(gt.w_true.begin(), gt.w_true.end());
    return gt;
}

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

struct EvalRun {
    std::vector<int> w_hat;
    std::vector<int> w_true;
    std::vector<int> variables;  // the candidate universe for this run
};

struct RatePair {
    double fpr = 0.0, tpr = 0.0;
    std::size_t fpr_den = 0, tpr_den = 0;
};

// Empirical rates over all (run, variable) pairs; classes with an empty
// denominator contribute nothing.
inline RatePair fpr_tpr(const std::vector<EvalRun>& runs) {
    if (runs.empty()) throw std::invalid_argument("fpr_tpr: empty input");
    std::size_t fp = 0, tp = 0, negd = 0, posd = 0;
    for (const auto& r : runs) {
        for (int v : r.variables) {
            const bool in_true = std::find(r.w_true.begin(), r.w_true.end(), v) != r.w_true.end();
            const bool in_hat = std::find(r.w_hat.begin(), r.w_hat.end(), v) != r.w_hat.end();
            if (in_true) {
                ++posd;
                tp += in_hat ? 1 : 0;
            } else {
                ++negd;
                fp += in_hat ? 1 : 0;
            }
        }
    }
    RatePair out;
    out.fpr_den = negd;
    out.tpr_den = posd;
    out.fpr = negd ? static_cast<double>(fp) / static_cast<double>(negd) : std::nan("");
    out.tpr = posd ? static_cast<double>(tp) / static_cast<double>(posd) : std::nan("");
    return out;
}

// Average misposition between the orderings of two residual vectors:
// (1/n^2) sum_i | #{l : e_l < e_i} - #{l : e'_l < e'_i} |.
inline double amp(const std::vector<double>& eps_true, const std::vector<double>& eps_hat) {
    if (eps_true.size() != eps_hat.size()) throw std::invalid_argument("amp: length mismatch");
    const std::size_t n = eps_true.size();
    if (n == 0) throw std::invalid_argument("amp: empty input");
    std::vector<double> st(eps_true), sh(eps_hat);
    std::sort(st.begin(), st.end());
    std::sort(sh.begin(), sh.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = std::lower_bound(st.begin(), st.end(), eps_true[i]) - st.begin();
        const auto b = std::lower_bound(sh.begin(), sh.end(), eps_hat[i]) - sh.begin();
        acc += std::fabs(static_cast<double>(a - b));
    }
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

// |mean prediction error on the interventional data| relative to the mean
// response on the observational data.
inline double relative_bias(const FittedModel& model, const Dataset& d_interv, const Dataset& d_obs) {
    if (d_interv.n() == 0 || d_obs.n() == 0) throw std::invalid_argument("relative_bias: empty dataset");
    if (d_interv.p() != d_obs.p()) throw std::invalid_argument("relative_bias: predictor schema mismatch");
    const std::vector<double> pred = model.predict(d_interv.x);
    double num = 0.0;
    for (std::size_t i = 0; i < d_interv.n(); ++i) num += d_interv.y[i] - pred[i];
    num = std::fabs(num / static_cast<double>(d_interv.n()));
    double denom = 0.0;
    for (double v : d_obs.y) denom += v;
    denom /= static_cast<double>(d_obs.n());
    if (denom == 0.0) throw input_error("relative_bias: observational mean response is zero; ratio undefined");
    return num / denom;
}

}  // namespace wellspec
