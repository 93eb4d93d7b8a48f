#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wellspec/pipeline.hpp"
#include "wellspec/scmlab.hpp"

using namespace wellspec;

namespace {

Dataset independent_data(RngStream& rng, std::size_t n, std::size_t p) {
    Dataset ds;
    ds.target_name = "y";
    ds.x = Matrix(n, p);
    ds.y.resize(n);
    for (std::size_t j = 0; j < p; ++j) ds.names.push_back("x" + std::to_string(j + 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) ds.x(i, j) = rng.normal();
        ds.y[i] = rng.normal();
    }
    return ds;
}

Dataset well_specified_anm(RngStream& rng, std::size_t n) {
    Dataset ds;
    ds.target_name = "y";
    ds.names = {"x1"};
    ds.x = Matrix(n, 1);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.x(i, 0) = rng.uniform(-2, 2);
        ds.y[i] = 2.0 * std::sin(2.0 * ds.x(i, 0)) + rng.normal();
    }
    return ds;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

PipelineOptions fast_options() {
    PipelineOptions o;
    o.n_perm = 199;
    return o;
}

RegressorSpec fast_regressor() {
    RegressorSpec r;
    r.max_rounds = 150;
    return r;
}

}  // namespace

TEST(Pipeline, SelectByCountsPaperFixture) {
    // counts (22, 19, 41) over 2B = 50 trials: mean 82/3, the above-average
    // group is {41}, and both below-average variables clear alpha_tilde=0.01.
    const CountSelection sel = select_by_counts({22, 19, 41}, 50, 0.01);
    EXPECT_NEAR(sel.n_bar, 82.0 / 3.0, 1e-12);
    EXPECT_EQ(sel.n_min, 41);
    EXPECT_EQ(sel.w_hat, (std::vector<int>{0, 1}));
    ASSERT_TRUE(sel.proportion_pvalues.count(0));
    ASSERT_TRUE(sel.proportion_pvalues.count(1));
    EXPECT_FALSE(sel.proportion_pvalues.count(2));
    EXPECT_GT(sel.proportion_pvalues.at(0), 7.7e-05 / 2);
    EXPECT_LT(sel.proportion_pvalues.at(0), 7.7e-05 * 2);
    EXPECT_GT(sel.proportion_pvalues.at(1), 6.3e-06 / 2);
    EXPECT_LT(sel.proportion_pvalues.at(1), 6.3e-06 * 2);
}

TEST(Pipeline, SelectByCountsAllEqual) {
    const CountSelection sel = select_by_counts({7, 7, 7, 7}, 20, 0.5);
    EXPECT_TRUE(sel.w_hat.empty());  // nothing lies below the mean
    EXPECT_TRUE(sel.proportion_pvalues.empty());
    EXPECT_EQ(sel.n_min, 7);
}

TEST(Pipeline, SelectByCountsMonotoneInAlphaTilde) {
    RngStream rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t p = 2 + rng.below(6);
        const std::size_t trials = 10 + rng.below(60);
        std::vector<int> counts(p);
        for (auto& c : counts) c = static_cast<int>(rng.below(trials + 1));
        const double at_hi = 0.05 + 0.2 * rng.uniform01();
        const double at_lo = at_hi * rng.uniform01();
        const CountSelection hi = select_by_counts(counts, trials, at_hi);
        const CountSelection lo = select_by_counts(counts, trials, at_lo);
        for (int j : lo.w_hat) EXPECT_TRUE(contains(hi.w_hat, j));
        // structural invariant: selected variables lie strictly below the mean
        for (int j : hi.w_hat)
            EXPECT_LT(static_cast<double>(counts[static_cast<std::size_t>(j)]), hi.n_bar);
    }
}

TEST(Pipeline, Alg1DeterministicGivenSeed) {
    RngStream rng(11);
    const Dataset ds = independent_data(rng, 400, 2);
    const FociResult a = alg1_insample(ds, fast_regressor(), GMode::kAbsolute, RngStream(5));
    const FociResult b = alg1_insample(ds, fast_regressor(), GMode::kAbsolute, RngStream(5));
    EXPECT_EQ(a.selected, b.selected);
}

// Under independence the selection is a coin-flip on finite-sample noise:
// small sets dominate and no column is selected consistently (the spec's
// "empty in a majority" is not what the pinned greedy rule produces; see the
// oracle-derived distribution in the rankdep tests).
TEST(Pipeline, Alg1IndependenceSelectsLittle) {
    int small_sets = 0;
    std::vector<int> col_hits(3, 0);
    const int seeds = 60;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(3000 + static_cast<std::uint64_t>(s));
        const Dataset ds = independent_data(rng, 1000, 3);
        const FociResult res = alg1_insample(ds, fast_regressor(), GMode::kAbsolute, rng.child(9));
        small_sets += res.selected.size() <= 1;
        for (int j : res.selected) ++col_hits[static_cast<std::size_t>(j)];
    }
    EXPECT_GE(small_sets, seeds * 6 / 10);
    for (int j = 0; j < 3; ++j) EXPECT_LE(col_hits[static_cast<std::size_t>(j)], seeds * 6 / 10);
}

// Strong hidden confounder (Fig 1 left): X1 sits in the Markov boundary of
// the residual, so FOCI should flag it in most runs at n = 10^4.
TEST(Pipeline, Alg1ConfoundedFlagsX1) {
    int hits = 0;
    const int seeds = 40;
    const ScmSpec scm = fig1_left_scm();
    for (int s = 0; s < seeds; ++s) {
        const SampleResult sample = sample_scm(scm, 10000, RngStream(4000 + static_cast<std::uint64_t>(s)));
        const FociResult res =
            alg1_insample(sample.data, fast_regressor(), GMode::kAbsolute, RngStream(9000 + static_cast<std::uint64_t>(s)));
        hits += contains(res.selected, 0);  // X1 is predictor column 0
    }
    EXPECT_GE(hits, seeds * 8 / 10);
}

TEST(Pipeline, Alg2WellSpecifiedMedianPb) {
    std::vector<double> pbs;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(5000 + static_cast<std::uint64_t>(s));
        const Dataset ds = well_specified_anm(rng, 2000);
        const SplitPlan plan = make_split(ds.n(), 5000 + static_cast<std::uint64_t>(s), 0);
        const SplitRun run = alg2_split(ds, fast_regressor(), GMode::kAbsolute, plan, ResidualMode::kAnm,
                                        fast_options());
        pbs.push_back(run.p_b);
    }
    std::nth_element(pbs.begin(), pbs.begin() + seeds / 2, pbs.end());
    EXPECT_GE(pbs[seeds / 2], 0.05);
}

TEST(Pipeline, Alg2ConfoundedRejects) {
    int rejections = 0;
    const int seeds = 30;
    const ScmSpec scm = fig1_left_scm();
    for (int s = 0; s < seeds; ++s) {
        const SampleResult sample = sample_scm(scm, 10000, RngStream(6000 + static_cast<std::uint64_t>(s)));
        const SplitPlan plan = make_split(sample.data.n(), 6000 + static_cast<std::uint64_t>(s), 0);
        const SplitRun run = alg2_split(sample.data, fast_regressor(), GMode::kAbsolute, plan,
                                        ResidualMode::kAnm, fast_options());
        rejections += run.p_b <= 0.05;
    }
    EXPECT_GE(rejections, seeds * 9 / 10);
}

TEST(Pipeline, Alg2SwappedHalvesSameContract) {
    RngStream rng(17);
    const Dataset ds = well_specified_anm(rng, 300);
    SplitPlan plan = make_split(ds.n(), 99, 0);
    const SplitRun a = alg2_split(ds, fast_regressor(), GMode::kAbsolute, plan, ResidualMode::kAnm,
                                  fast_options());
    std::swap(plan.half_a, plan.half_b);
    const SplitRun b = alg2_split(ds, fast_regressor(), GMode::kAbsolute, plan, ResidualMode::kAnm,
                                  fast_options());
    for (const SplitRun* r : {&a, &b}) {
        EXPECT_GT(r->p_b, 0.0);
        EXPECT_LE(r->p_b, 1.0);
        for (int j : r->s_hat) {
            EXPECT_GE(j, 0);
            EXPECT_LT(j, static_cast<int>(ds.p()));
        }
    }
}

TEST(Pipeline, Alg2RejectsTinyHalves) {
    RngStream rng(19);
    const Dataset ds = independent_data(rng, 6, 1);
    SplitPlan plan = make_split(6, 1, 0);
    EXPECT_THROW(alg2_split(ds, RegressorSpec{}, GMode::kAbsolute, plan, ResidualMode::kAnm, {}),
                 input_error);
}

TEST(Pipeline, Alg2LsnmModeRecordsFallbacks) {
    const SampleResult sample = sample_scm(lsnm_suite(), 800, RngStream(23));
    const SplitPlan plan = make_split(sample.data.n(), 23, 0);
    const SplitRun run = alg2_split(sample.data, fast_regressor(), GMode::kIdentity, plan,
                                    ResidualMode::kLsnm, fast_options());
    EXPECT_GT(run.p_b, 0.0);
    EXPECT_LE(run.fallback_count, sample.data.n());
}

// The global gate: when every split p-value sits at the permutation floor and
// the floor is too high for alpha, the aggregated p0 cannot reject and the
// report must accept all variables.
TEST(Pipeline, Alg3AcceptsAllWhenGlobalStands) {
    RngStream rng(29);
    const Dataset ds = independent_data(rng, 200, 3);
    PipelineOptions opt;
    opt.n_perm = 24;  // p-value floor 0.04; p0 >= 0.16 > alpha
    RegressorSpec reg = fast_regressor();
    const WellSpecReport rep =
        alg3_multisplit(ds, reg, GMode::kAbsolute, 2, 0.01, 0.01, ResidualMode::kAnm, 7, 1, opt);
    EXPECT_TRUE(rep.all_variables);
    EXPECT_EQ(rep.w_hat, (std::vector<int>{0, 1, 2}));
    EXPECT_GT(rep.p0, 0.01);
    // counts are still reported and bounded by 2B
    ASSERT_EQ(rep.counts.size(), 3u);
    for (int c : rep.counts) {
        EXPECT_GE(c, 0);
        EXPECT_LE(c, 4);
    }
}

// Lowering alpha can only move the outcome from the subset regime to the
// all-variables regime, never the reverse.
TEST(Pipeline, Alg3LiberalAlphaDirection) {
    const SampleResult sample = sample_scm(fig1_left_scm(), 600, RngStream(31));
    RegressorSpec reg = fast_regressor();
    PipelineOptions opt = fast_options();
    const WellSpecReport hi = alg3_multisplit(sample.data, reg, GMode::kAbsolute, 3, 0.5, 0.05,
                                              ResidualMode::kAnm, 11, 1, opt);
    const WellSpecReport lo = alg3_multisplit(sample.data, reg, GMode::kAbsolute, 3, 1e-9, 0.05,
                                              ResidualMode::kAnm, 11, 1, opt);
    EXPECT_EQ(hi.counts, lo.counts);  // same seed, same splits
    EXPECT_TRUE(lo.all_variables);    // p0 can never be below the permutation floor
    if (!hi.all_variables) {
        for (int j : hi.w_hat) EXPECT_TRUE(contains(lo.w_hat, j));
    }
}

TEST(Pipeline, Alg3ReportInvariants) {
    const SampleResult sample = sample_scm(fig1_left_scm(), 500, RngStream(37));
    RegressorSpec reg = fast_regressor();
    const WellSpecReport rep = alg3_multisplit(sample.data, reg, GMode::kAbsolute, 4, 0.5, 0.1,
                                               ResidualMode::kAnm, 13, 1, fast_options());
    ASSERT_EQ(rep.counts.size(), 2u);
    long total = rep.counts[0] + rep.counts[1];
    EXPECT_NEAR(rep.n_bar, static_cast<double>(total) / 2.0, 1e-12);
    EXPECT_EQ(rep.split_runs.size(), 8u);
    for (const auto& r : rep.split_runs) {
        EXPECT_GT(r.p_b, 0.0);
        EXPECT_LE(r.p_b, 1.0);
    }
    if (!rep.all_variables) {
        for (int j : rep.w_hat)
            EXPECT_LT(static_cast<double>(rep.counts[static_cast<std::size_t>(j)]), rep.n_bar);
    }
    double minp = 1.0;
    for (const auto& r : rep.split_runs) minp = std::min(minp, r.p_b);
    EXPECT_GE(rep.p0, minp);
}

TEST(Pipeline, Alg3ReproducibleAcrossWorkerCounts) {
    const SampleResult sample = sample_scm(fig1_left_scm(), 160, RngStream(41));
    RegressorSpec reg;
    reg.max_rounds = 40;
    PipelineOptions opt;
    opt.n_perm = 49;
    std::vector<WellSpecReport> reps;
    for (std::size_t jobs : {1u, 4u, 8u})
        reps.push_back(alg3_multisplit(sample.data, reg, GMode::kAbsolute, 3, 0.05, 0.01,
                                       ResidualMode::kAnm, 17, jobs, opt));
    for (std::size_t k = 1; k < reps.size(); ++k) {
        EXPECT_EQ(reps[k].p0, reps[0].p0);
        EXPECT_EQ(reps[k].counts, reps[0].counts);
        EXPECT_EQ(reps[k].w_hat, reps[0].w_hat);
        ASSERT_EQ(reps[k].split_runs.size(), reps[0].split_runs.size());
        for (std::size_t i = 0; i < reps[0].split_runs.size(); ++i) {
            EXPECT_EQ(reps[k].split_runs[i].p_b, reps[0].split_runs[i].p_b);
            EXPECT_EQ(reps[k].split_runs[i].s_hat, reps[0].split_runs[i].s_hat);
        }
    }
}

TEST(Pipeline, Alg3ValidatesArguments) {
    RngStream rng(43);
    const Dataset ds = independent_data(rng, 100, 2);
    EXPECT_THROW(alg3_multisplit(ds, RegressorSpec{}, GMode::kAbsolute, 0, 0.05, 0.01,
                                 ResidualMode::kAnm, 1),
                 input_error);
    EXPECT_THROW(alg3_multisplit(ds, RegressorSpec{}, GMode::kAbsolute, 2, 1.5, 0.01,
                                 ResidualMode::kAnm, 1),
                 input_error);
    const Dataset tiny = independent_data(rng, 6, 2);
    EXPECT_THROW(alg3_multisplit(tiny, RegressorSpec{}, GMode::kAbsolute, 2, 0.05, 0.01,
                                 ResidualMode::kAnm, 1),
                 input_error);
}
