#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/indtest.hpp"
#include "wellspec/parallel.hpp"
#include "wellspec/rankdep.hpp"
#include "wellspec/regress.hpp"
#include "wellspec/rng.hpp"
#include "wellspec/tabular.hpp"

namespace wellspec {

struct PipelineOptions {
    std::size_t n_perm = 500;
    std::size_t hsic_max_n = 1024;
    HsicCalibration hsic_calibration = HsicCalibration::kPermutation;
    double gamma_min = 0.05;
    double big = 1e6;  // LSNM fallback magnitude
    bool standardize_foci = false;

    HsicOptions hsic_options() const {
        HsicOptions o;
        o.n_perm = n_perm;
        o.max_n = hsic_max_n;
        o.calibration = hsic_calibration;
        return o;
    }
};

// One data half-split's outcome: held-out HSIC p-value and FOCI selection.
struct SplitRun {
    std::size_t b = 0;
    bool swapped = false;  // true when this is the complementary orientation
    double p_b = 1.0;
    std::vector<int> s_hat;  // FOCI selection order
    std::size_t fallback_count = 0;
    bool foci_undefined = false;
};

// In-sample FOCI: fit on all rows (10% seeded holdout only for early
// stopping), residualize in sample, select on (g(eps_hat), x).
inline FociResult alg1_insample(const Dataset& ds, const RegressorSpec& spec, GMode g, const RngStream& rng,
                                ResidualMode mode = ResidualMode::kAnm, const PipelineOptions& options = {}) {
    const std::size_t n = ds.n();
    if (n < 8) throw input_error("alg1_insample: need n >= 8");
    RngStream hold_rng = rng.child(0);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    hold_rng.shuffle(idx);
    const std::size_t n_hold = std::max<std::size_t>(1, n / 10);
    std::vector<std::size_t> hold(idx.begin(), idx.begin() + n_hold);
    std::vector<std::size_t> train(idx.begin() + n_hold, idx.end());
    std::sort(hold.begin(), hold.end());
    std::sort(train.begin(), train.end());

    const Matrix x_train = ds.x.select_rows(train);
    const Matrix x_hold = ds.x.select_rows(hold);
    const std::vector<double> y_train = select(ds.y, train);
    const std::vector<double> y_hold = select(ds.y, hold);

    std::vector<double> eps;
    if (mode == ResidualMode::kAnm) {
        const FittedModel model = fit(spec, x_train, y_train, x_hold, y_hold);
        eps = residualize_anm(model, ds.x, ds.y).eps_hat;
    } else {
        const auto [f1, f2] = fit_moments(spec, x_train, y_train, x_hold, y_hold);
        eps = residualize_lsnm(f1, f2, ds.x, ds.y, options.big).eps_hat;
    }
    return foci_select(transform_g(eps, g), ds.x, rng.child(1), {options.standardize_foci});
}

// Sample-splitting FOCI: fit on half_a with early stopping on half_b,
// residualize half_b, and compute both the HSIC p-value and the FOCI set on
// half_b. In LSNM mode both conditional moments are fitted and the residuals
// normalized.
inline SplitRun alg2_split(const Dataset& ds, const RegressorSpec& spec, GMode g, const SplitPlan& plan,
                           ResidualMode mode, const PipelineOptions& options, const RngStream& rng) {
    if (plan.half_a.size() < 4 || plan.half_b.size() < 4)
        throw input_error("alg2_split: both halves need at least 4 rows");
    const Matrix x_a = ds.x.select_rows(plan.half_a);
    const Matrix x_b = ds.x.select_rows(plan.half_b);
    const std::vector<double> y_a = select(ds.y, plan.half_a);
    const std::vector<double> y_b = select(ds.y, plan.half_b);

    SplitRun run;
    run.b = plan.b;
    std::vector<double> eps;
    if (mode == ResidualMode::kAnm) {
        const FittedModel model = fit(spec, x_a, y_a, x_b, y_b);
        eps = residualize_anm(model, x_b, y_b).eps_hat;
    } else {
        const auto [f1, f2] = fit_moments(spec, x_a, y_a, x_b, y_b);
        Residuals res = residualize_lsnm(f1, f2, x_b, y_b, options.big);
        run.fallback_count = res.fallback_count;
        eps = std::move(res.eps_hat);
    }

    run.p_b = hsic_perm_test(eps, x_b, options.n_perm, rng.child(0), options.hsic_options()).p_value;
    const FociResult sel = foci_select(transform_g(eps, g), x_b, rng.child(1), {options.standardize_foci});
    run.s_hat = sel.selected;
    run.foci_undefined = sel.undefined;
    return run;
}

// Convenience overload deriving the stream from the plan.
inline SplitRun alg2_split(const Dataset& ds, const RegressorSpec& spec, GMode g, const SplitPlan& plan,
                           ResidualMode mode = ResidualMode::kAnm, const PipelineOptions& options = {}) {
    return alg2_split(ds, spec, g, plan, mode, options, RngStream(plan.seed, {0xA2u, plan.b}));
}

// Mean-threshold grouping and proportion testing on selection counts: the
// below-average variables are compared against n_min = min{n_j : n_j >= mean}
// with the one-sided Fisher test.
struct CountSelection {
    std::vector<int> w_hat;  // ascending variable indices
    double n_bar = 0.0;
    int n_min = 0;
    std::map<int, double> proportion_pvalues;  // per below-average candidate
};

inline CountSelection select_by_counts(const std::vector<int>& counts, std::size_t trials, double alpha_tilde) {
    if (counts.empty()) throw std::invalid_argument("select_by_counts: no counts");
    for (int c : counts)
        if (c < 0 || static_cast<std::size_t>(c) > trials)
            throw std::invalid_argument("select_by_counts: count out of range");
    CountSelection out;
    long total = 0;
    for (int c : counts) total += c;
    out.n_bar = static_cast<double>(total) / static_cast<double>(counts.size());
    int n_min = static_cast<int>(trials) + 1;
    for (int c : counts)
        if (static_cast<double>(c) >= out.n_bar) n_min = std::min(n_min, c);
    out.n_min = n_min;  // the group {n_j >= mean} is never empty: max >= mean
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (static_cast<double>(counts[j]) >= out.n_bar) continue;
        const double p = fisher_exact_less(static_cast<std::size_t>(counts[j]),
                                           static_cast<std::size_t>(n_min), trials);
        out.proportion_pvalues[static_cast<int>(j)] = p;
        if (p <= alpha_tilde) out.w_hat.push_back(static_cast<int>(j));
    }
    return out;
}

struct WellSpecReport {
    double p0 = 1.0;
    double alpha = 0.05;
    double alpha_tilde = 0.01;
    std::size_t b_splits = 25;  // B; the procedure runs 2B split evaluations
    ResidualMode mode = ResidualMode::kAnm;
    GMode g = GMode::kAbsolute;
    std::uint64_t master_seed = 0;
    std::vector<int> counts;     // n_j per predictor, column order
    double n_bar = 0.0;
    int n_min = 0;
    std::map<int, double> proportion_pvalues;
    std::vector<int> w_hat;      // ascending predictor indices
    bool all_variables = false;  // p0 > alpha: the global model stands
    std::vector<SplitRun> split_runs;
    std::vector<std::string> predictor_names;
    std::string target_name;
    RegressorSpec regressor;
    PipelineOptions options;
};

// Algorithm: B complementary split pairs -> 2B (p_b, S_b); p0 aggregates the
// p-values; if p0 > alpha every effect is accepted, otherwise selection
// counts decide via select_by_counts.
inline WellSpecReport alg3_multisplit(const Dataset& ds, const RegressorSpec& spec, GMode g, std::size_t b_splits,
                                      double alpha, double alpha_tilde, ResidualMode mode,
                                      std::uint64_t master_seed, std::size_t n_jobs = 1,
                                      const PipelineOptions& options = {}) {
    if (b_splits < 1) throw input_error("alg3_multisplit: need B >= 1");
    if (ds.n() < 8) throw input_error("alg3_multisplit: need n >= 8");
    if (ds.p() < 1) throw input_error("alg3_multisplit: need p >= 1");
    if (!(alpha > 0.0 && alpha < 1.0) || !(alpha_tilde > 0.0 && alpha_tilde < 1.0))
        throw input_error("alg3_multisplit: alpha and alpha_tilde must be in (0,1)");
    spec.validate();

    const RngStream base(master_seed);
    std::vector<SplitRun> runs(2 * b_splits);
    parallel_for(n_jobs, 2 * b_splits, [&](std::size_t k) {
        const std::size_t b = k / 2;
        const bool swapped = (k % 2) == 1;
        SplitPlan plan = make_split(ds.n(), master_seed, b);
        if (swapped) std::swap(plan.half_a, plan.half_b);
        SplitRun run = alg2_split(ds, spec, g, plan, mode, options,
                                  base.child(0xA3u).child(b).child(swapped ? 1 : 0));
        run.swapped = swapped;
        runs[k] = std::move(run);
    });

    WellSpecReport rep;
    rep.alpha = alpha;
    rep.alpha_tilde = alpha_tilde;
    rep.b_splits = b_splits;
    rep.mode = mode;
    rep.g = g;
    rep.master_seed = master_seed;
    rep.predictor_names = ds.names;
    rep.target_name = ds.target_name;
    rep.regressor = spec;
    rep.options = options;

    std::vector<double> pvals;
    pvals.reserve(runs.size());
    for (const auto& r : runs) pvals.push_back(r.p_b);
    rep.p0 = aggregate_pvalues(pvals, options.gamma_min).p0;

    rep.counts.assign(ds.p(), 0);
    for (const auto& r : runs)
        for (int j : r.s_hat) ++rep.counts[static_cast<std::size_t>(j)];
    const CountSelection sel = select_by_counts(rep.counts, runs.size(), alpha_tilde);
    rep.n_bar = sel.n_bar;
    rep.n_min = sel.n_min;

    if (rep.p0 > alpha) {
        rep.all_variables = true;
        for (std::size_t j = 0; j < ds.p(); ++j) rep.w_hat.push_back(static_cast<int>(j));
    } else {
        rep.proportion_pvalues = sel.proportion_pvalues;
        rep.w_hat = sel.w_hat;
    }
    rep.split_runs = std::move(runs);
    return rep;
}

}  // namespace wellspec
