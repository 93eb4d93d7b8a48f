#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "wellspec/regress.hpp"
#include "wellspec/rng.hpp"

using namespace wellspec;

namespace {

struct Xy {
    Matrix x;
    std::vector<double> y;
};

Xy make_step_data(RngStream& rng, std::size_t n) {
    Xy d;
    d.x = Matrix(n, 1);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(-1, 1);
        d.y[i] = d.x(i, 0) > 0 ? 1.0 : 0.0;
    }
    return d;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto rank = [](const std::vector<double>& v) {
        std::vector<double> s(v);
        std::sort(s.begin(), s.end());
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto lo = std::lower_bound(s.begin(), s.end(), v[i]) - s.begin();
            const auto hi = std::upper_bound(s.begin(), s.end(), v[i]) - s.begin();
            r[i] = 0.5 * static_cast<double>(lo + hi - 1);
        }
        return r;
    };
    const std::vector<double> ra = rank(a), rb = rank(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

}  // namespace

TEST(Regress, ConstantTargetIsExact) {
    Matrix x(20, 1);
    RngStream rng(1);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<double> y(20, 3.25);
    RegressorSpec spec;
    const FittedModel m = fit(spec, x, y, x, y);
    for (double p : m.predict(x)) EXPECT_DOUBLE_EQ(p, 3.25);
    EXPECT_DOUBLE_EQ(m.training_trace().front(), 0.0);
}

TEST(Regress, StepFunctionFit) {
    RngStream rng(2);
    const Xy train = make_step_data(rng, 500);
    const Xy valid = make_step_data(rng, 500);
    RegressorSpec spec;
    spec.max_depth = 2;
    const FittedModel m = fit(spec, train.x, train.y, valid.x, valid.y);
    const std::vector<double> pred = m.predict(valid.x);
    double mse = 0, var = 0, mean = 0;
    for (double v : valid.y) mean += v;
    mean /= static_cast<double>(valid.y.size());
    for (std::size_t i = 0; i < valid.y.size(); ++i) {
        mse += (pred[i] - valid.y[i]) * (pred[i] - valid.y[i]);
        var += (valid.y[i] - mean) * (valid.y[i] - mean);
    }
    EXPECT_LT(mse, 0.05 * var);
}

TEST(Regress, EarlyStoppingOnNoise) {
    int early = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        RngStream rng(100 + static_cast<std::uint64_t>(s));
        Matrix x(200, 2);
        std::vector<double> y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            x(i, 0) = rng.normal();
            x(i, 1) = rng.normal();
            y[i] = rng.normal();
        }
        Matrix xv(200, 2);
        std::vector<double> yv(200);
        for (std::size_t i = 0; i < 200; ++i) {
            xv(i, 0) = rng.normal();
            xv(i, 1) = rng.normal();
            yv[i] = rng.normal();
        }
        RegressorSpec spec;
        spec.max_rounds = 100;
        spec.early_stop_patience = 5;
        const FittedModel m = fit(spec, x, y, xv, yv);
        early += m.rounds_used() < spec.max_rounds;
    }
    EXPECT_GE(early, 18);  // >= 90% of seeds
}

TEST(Regress, TrainingLossNonIncreasing) {
    RngStream rng(3);
    Matrix x(300, 2);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = std::sin(2 * x(i, 0)) + 0.5 * x(i, 1) + 0.2 * rng.normal();
    }
    RegressorSpec spec;
    spec.max_rounds = 60;
    const FittedModel m = fit(spec, x, y, x, y);
    const auto& trace = m.training_trace();
    ASSERT_GE(trace.size(), 2u);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
}

TEST(Regress, ValidationKeepsBestRound) {
    RngStream rng(4);
    Matrix x(300, 1), xv(300, 1);
    std::vector<double> y(300), yv(300);
    for (std::size_t i = 0; i < 300; ++i) {
        x(i, 0) = rng.normal();
        y[i] = x(i, 0) + rng.normal();
        xv(i, 0) = rng.normal();
        yv[i] = xv(i, 0) + rng.normal();
    }
    RegressorSpec spec;
    spec.max_rounds = 200;
    spec.early_stop_patience = 10;
    const FittedModel m = fit(spec, x, y, xv, yv);
    const auto& trace = m.validation_trace();
    const auto best = std::min_element(trace.begin(), trace.end()) - trace.begin();
    EXPECT_EQ(m.rounds_used(), static_cast<int>(best));
}

TEST(Regress, ConstantFeatureFallsBackToMean) {
    Matrix x(40, 1, 1.0);
    std::vector<double> y(40);
    RngStream rng(5);
    for (auto& v : y) v = rng.normal();
    RegressorSpec spec;
    const FittedModel m = fit(spec, x, y, x, y);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 40.0;
    for (double p : m.predict(x)) EXPECT_DOUBLE_EQ(p, mean);
}

TEST(Regress, KnnAndConstantKinds) {
    RngStream rng(6);
    Matrix x(200, 1);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        x(i, 0) = rng.uniform(-2, 2);
        y[i] = x(i, 0) * x(i, 0);
    }
    RegressorSpec knn;
    knn.kind = RegressorKind::kKnn;
    knn.k = 5;
    const FittedModel mk = fit(knn, x, y, x, y);
    Matrix probe(1, 1);
    probe(0, 0) = 1.0;
    EXPECT_NEAR(mk.predict(probe)[0], 1.0, 0.2);

    RegressorSpec cm;
    cm.kind = RegressorKind::kConstantMean;
    const FittedModel mc = fit(cm, x, y, x, y);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 200.0;
    EXPECT_DOUBLE_EQ(mc.predict(probe)[0], mean);
}

TEST(Regress, SpecValidation) {
    RegressorSpec bad;
    bad.learning_rate = 0.0;
    EXPECT_THROW(bad.validate(), input_error);
    bad = RegressorSpec{};
    bad.max_rounds = 0;
    EXPECT_THROW(bad.validate(), input_error);
}

TEST(Regress, ResidualizeAnmReconstructsY) {
    RngStream rng(7);
    Matrix x(150, 2), xv(150, 2);
    std::vector<double> y(150), yv(150);
    for (std::size_t i = 0; i < 150; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = x(i, 0) - x(i, 1) + 0.3 * rng.normal();
        xv(i, 0) = rng.normal();
        xv(i, 1) = rng.normal();
        yv[i] = xv(i, 0) - xv(i, 1) + 0.3 * rng.normal();
    }
    const FittedModel m = fit(RegressorSpec{}, x, y, xv, yv);
    const Residuals res = residualize_anm(m, xv, yv);
    const std::vector<double> pred = m.predict(xv);
    // subtraction then re-addition recovers y up to rounding at the scale of
    // the larger operand
    for (std::size_t i = 0; i < yv.size(); ++i) {
        const double tol =
            8 * std::numeric_limits<double>::epsilon() * (std::fabs(res.eps_hat[i]) + std::fabs(pred[i]));
        EXPECT_NEAR(res.eps_hat[i] + pred[i], yv[i], tol);
    }
    EXPECT_EQ(res.mode, ResidualMode::kAnm);
    EXPECT_EQ(res.fallback_count, 0u);
}

TEST(Regress, ResidualizeAnmConstantModel) {
    Matrix x(10, 1);
    std::vector<double> y(10);
    for (std::size_t i = 0; i < 10; ++i) {
        x(i, 0) = static_cast<double>(i);
        y[i] = static_cast<double>(i) + 1.0;
    }
    RegressorSpec cm;
    cm.kind = RegressorKind::kConstantMean;
    const FittedModel m = fit(cm, x, y, x, y);
    const Residuals res = residualize_anm(m, x, y);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 10.0;
    for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(res.eps_hat[i], y[i] - mean);
}

TEST(Regress, FitMomentsConstantTarget) {
    Matrix x(30, 1);
    RngStream rng(8);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<double> y(30, 2.0);
    const auto [f1, f2] = fit_moments(RegressorSpec{}, x, y, x, y);
    EXPECT_DOUBLE_EQ(f1.predict(x)[0], 2.0);
    EXPECT_DOUBLE_EQ(f2.predict(x)[0], 4.0);  // implied variance 0
}

TEST(Regress, FitMomentsHomoscedastic) {
    RngStream rng(9);
    const std::size_t n = 10000;
    Matrix x(n, 1), xv(n, 1);
    std::vector<double> y(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-2, 2);
        y[i] = x(i, 0) + rng.normal();
        xv(i, 0) = rng.uniform(-2, 2);
        yv[i] = xv(i, 0) + rng.normal();
    }
    const auto [f1, f2] = fit_moments(RegressorSpec{}, x, y, xv, yv);
    const std::vector<double> m1 = f1.predict(xv);
    const std::vector<double> m2 = f2.predict(xv);
    std::vector<double> implied(n);
    for (std::size_t i = 0; i < n; ++i) implied[i] = m2[i] - m1[i] * m1[i];
    std::nth_element(implied.begin(), implied.begin() + n / 2, implied.end());
    EXPECT_GT(implied[n / 2], 0.7);
    EXPECT_LT(implied[n / 2], 1.3);
}

TEST(Regress, FitMomentsHeteroscedastic) {
    RngStream rng(10);
    const std::size_t n = 10000;
    Matrix x(n, 1), xv(n, 1);
    std::vector<double> y(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-2, 2);
        y[i] = x(i, 0) * rng.normal();
        xv(i, 0) = rng.uniform(-2, 2);
        yv[i] = xv(i, 0) * rng.normal();
    }
    const auto [f1, f2] = fit_moments(RegressorSpec{}, x, y, xv, yv);
    const std::vector<double> m1 = f1.predict(xv);
    const std::vector<double> m2 = f2.predict(xv);
    std::vector<double> implied(n), x2(n);
    for (std::size_t i = 0; i < n; ++i) {
        implied[i] = m2[i] - m1[i] * m1[i];
        x2[i] = xv(i, 0) * xv(i, 0);
    }
    EXPECT_GE(spearman(implied, x2), 0.5);
}

TEST(Regress, ResidualizeLsnmUnitVariance) {
    // f2 == f1^2 + 1 everywhere => plain subtraction
    Matrix x(12, 1);
    std::vector<double> y(12);
    RngStream rng(11);
    for (std::size_t i = 0; i < 12; ++i) {
        x(i, 0) = rng.normal();
        y[i] = rng.normal() * 2 + 1;
    }
    RegressorSpec cm;
    cm.kind = RegressorKind::kConstantMean;
    const std::vector<double> c1(12, 0.5);
    const std::vector<double> c2(12, 0.5 * 0.5 + 1.0);
    const FittedModel f1 = fit(cm, x, c1, x, c1);
    const FittedModel f2 = fit(cm, x, c2, x, c2);
    const Residuals res = residualize_lsnm(f1, f2, x, y);
    EXPECT_EQ(res.fallback_count, 0u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(res.eps_hat[i], y[i] - 0.5);
}

TEST(Regress, ResidualizeLsnmFallbackSign) {
    Matrix x(4, 1);
    std::vector<double> y{2.0, -3.0, 1.0, 0.5};
    for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
    RegressorSpec cm;
    cm.kind = RegressorKind::kConstantMean;
    const std::vector<double> c1(4, 0.0);
    const std::vector<double> c2(4, -1.0);  // variance estimate -1 <= 0 everywhere
    const FittedModel f1 = fit(cm, x, c1, x, c1);
    const FittedModel f2 = fit(cm, x, c2, x, c2);
    const Residuals res = residualize_lsnm(f1, f2, x, y);
    EXPECT_EQ(res.fallback_count, 4u);
    EXPECT_DOUBLE_EQ(res.eps_hat[0], 1e6);
    EXPECT_DOUBLE_EQ(res.eps_hat[1], -1e6);
    for (double v : res.eps_hat) EXPECT_TRUE(std::isfinite(v));
}

TEST(Regress, ResidualizeLsnmScaleInvariance) {
    RngStream rng(12);
    const std::size_t n = 50;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y[i] = 2 + rng.normal();
    }
    RegressorSpec cm;
    cm.kind = RegressorKind::kConstantMean;
    auto make_const = [&](double v) {
        const std::vector<double> t(n, v);
        return fit(cm, x, t, x, t);
    };
    const double c = 3.7;
    const FittedModel f1 = make_const(1.5);
    const FittedModel f2 = make_const(1.5 * 1.5 + 2.0);
    const Residuals base = residualize_lsnm(f1, f2, x, y);
    std::vector<double> yc(n);
    for (std::size_t i = 0; i < n; ++i) yc[i] = c * y[i];
    const FittedModel f1c = make_const(c * 1.5);
    const FittedModel f2c = make_const(c * c * (1.5 * 1.5 + 2.0));
    const Residuals scaled = residualize_lsnm(f1c, f2c, x, yc);
    ASSERT_EQ(base.fallback_count, 0u);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(scaled.eps_hat[i], base.eps_hat[i], 1e-12);
}
