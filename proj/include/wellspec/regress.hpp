#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "wellspec/common.hpp"
#include "wellspec/kdtree.hpp"

namespace wellspec {

enum class RegressorKind { kBoostedTrees, kKnn, kConstantMean };

struct RegressorSpec {
    RegressorKind kind = RegressorKind::kBoostedTrees;
    // boosted trees
    int max_rounds = 500;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
    int early_stop_patience = 20;
    // knn
    int k = 10;

    void validate() const {
        if (max_rounds < 1) throw input_error("max_rounds must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw input_error("learning_rate must be in (0,1]");
        if (max_depth < 1) throw input_error("max_depth must be >= 1");
        if (min_leaf < 1) throw input_error("min_leaf must be >= 1");
        if (early_stop_patience < 1) throw input_error("early_stop_patience must be >= 1");
        if (k < 1) throw input_error("k must be >= 1");
    }
};

namespace detail {

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const double* x) const {
        int cur = 0;
        while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(cur)];
            cur = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(cur)].value;
    }
};

// Exact greedy CART split on SSE gain. `order[f]` are this node's row ids in
// ascending feature-f order; children receive stable partitions of them.
class TreeBuilder {
  public:
    TreeBuilder(const Matrix& x, const std::vector<double>& grad, int max_depth, int min_leaf)
        : x_(x), grad_(grad), max_depth_(max_depth), min_leaf_(min_leaf) {}

    Tree build(std::vector<std::vector<int>> order) {
        tree_.nodes.clear();
        grow(std::move(order), 0);
        return std::move(tree_);
    }

  private:
    int grow(std::vector<std::vector<int>> order, int depth) {
        const std::vector<int>& rows = order[0];
        const auto n = static_cast<std::int64_t>(rows.size());
        double sum = 0.0;
        for (int i : rows) sum += grad_[static_cast<std::size_t>(i)];

        const int self = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.nodes[self].value = sum / static_cast<double>(n);
        if (depth >= max_depth_ || n < 2 * min_leaf_) return self;

        int best_f = -1;
        double best_gain = 0.0, best_thresh = 0.0;
        const double parent_score = sum * sum / static_cast<double>(n);
        for (std::size_t f = 0; f < x_.cols; ++f) {
            const std::vector<int>& ord = order[f];
            double left_sum = 0.0;
            for (std::int64_t i = 0; i + 1 < n; ++i) {
                left_sum += grad_[static_cast<std::size_t>(ord[i])];
                const double v = x_(static_cast<std::size_t>(ord[i]), f);
                const double vn = x_(static_cast<std::size_t>(ord[i + 1]), f);
                if (v == vn) continue;
                const std::int64_t nl = i + 1, nr = n - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent_score;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    best_thresh = 0.5 * (v + vn);
                }
            }
        }
        if (best_f < 0) return self;

        std::vector<char> go_left(x_.rows, 0);
        for (int i : rows)
            go_left[static_cast<std::size_t>(i)] =
                x_(static_cast<std::size_t>(i), static_cast<std::size_t>(best_f)) <= best_thresh ? 1 : 0;
        std::vector<std::vector<int>> left_order(x_.cols), right_order(x_.cols);
        for (std::size_t f = 0; f < x_.cols; ++f) {
            left_order[f].reserve(rows.size());
            right_order[f].reserve(rows.size());
            for (int i : order[f]) (go_left[static_cast<std::size_t>(i)] ? left_order[f] : right_order[f]).push_back(i);
        }
        order.clear();
        order.shrink_to_fit();

        tree_.nodes[self].feature = best_f;
        tree_.nodes[self].threshold = best_thresh;
        const int l = grow(std::move(left_order), depth + 1);
        const int r = grow(std::move(right_order), depth + 1);
        tree_.nodes[self].left = l;
        tree_.nodes[self].right = r;
        return self;
    }

    const Matrix& x_;
    const std::vector<double>& grad_;
    int max_depth_;
    int min_leaf_;
    Tree tree_;
};

}  // namespace detail

// Immutable after fit; prediction is deterministic given the fitted state.
class FittedModel {
  public:
    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows);
        if (kind_ == RegressorKind::kKnn) {
            const KdTree index(train_x_);
            const std::size_t k = static_cast<std::size_t>(std::min<int>(knn_k_, static_cast<int>(train_x_.rows)));
            std::vector<int> nb;
            for (std::size_t i = 0; i < x.rows; ++i) {
                index.knn(x.row(i), k, nb);
                double s = 0.0;
                for (int t : nb) s += train_y_[static_cast<std::size_t>(t)];
                out[i] = nb.empty() ? base_ : s / static_cast<double>(nb.size());
            }
            return out;
        }
        for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_row(x.row(i), x.cols);
        return out;
    }

    double predict_row(const double* x, std::size_t cols) const {
        switch (kind_) {
            case RegressorKind::kConstantMean:
                return base_;
            case RegressorKind::kKnn: {
                const KdTree index(train_x_);
                std::vector<int> nb;
                index.knn(x, static_cast<std::size_t>(std::min<int>(knn_k_, static_cast<int>(train_x_.rows))), nb);
                double s = 0.0;
                for (int i : nb) s += train_y_[static_cast<std::size_t>(i)];
                return nb.empty() ? base_ : s / static_cast<double>(nb.size());
            }
            case RegressorKind::kBoostedTrees: {
                (void)cols;
                double f = base_;
                for (const auto& t : trees_) f += learning_rate_ * t.predict_row(x);
                return f;
            }
        }
        return base_;
    }

    int rounds_used() const { return static_cast<int>(trees_.size()); }
    const std::vector<double>& validation_trace() const { return validation_trace_; }
    const std::vector<double>& training_trace() const { return training_trace_; }
    RegressorKind kind() const { return kind_; }

  private:
    friend FittedModel fit(const RegressorSpec&, const Matrix&, const std::vector<double>&, const Matrix&,
                           const std::vector<double>&);

    RegressorKind kind_ = RegressorKind::kConstantMean;
    double base_ = 0.0;
    double learning_rate_ = 0.1;
    std::vector<detail::Tree> trees_;
    std::vector<double> validation_trace_;
    std::vector<double> training_trace_;
    // knn state
    Matrix train_x_;
    std::vector<double> train_y_;
    int knn_k_ = 10;
};

// Stagewise squared-loss boosting of depth-limited trees. Validation MSE is
// tracked every round; fitting stops after `early_stop_patience` rounds
// without improvement and the best-validation round count is kept.
inline FittedModel fit(const RegressorSpec& spec, const Matrix& x_train, const std::vector<double>& y_train,
                       const Matrix& x_valid, const std::vector<double>& y_valid) {
    spec.validate();
    if (x_train.rows != y_train.size() || x_valid.rows != y_valid.size() || x_train.cols != x_valid.cols)
        throw std::invalid_argument("fit: inconsistent shapes");
    if (x_train.rows == 0) throw std::invalid_argument("fit: empty training set");

    FittedModel model;
    model.kind_ = spec.kind;
    model.base_ = std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size());
    model.learning_rate_ = spec.learning_rate;

    if (spec.kind == RegressorKind::kConstantMean) return model;
    if (spec.kind == RegressorKind::kKnn) {
        model.train_x_ = x_train;
        model.train_y_ = y_train;
        model.knn_k_ = spec.k;
        return model;
    }

    if (static_cast<int>(x_train.rows) < 2 * spec.min_leaf) {
        // not enough rows for a single split; the mean is the model
        return model;
    }

    const std::size_t n = x_train.rows;
    std::vector<std::vector<int>> base_order(x_train.cols);
    for (std::size_t f = 0; f < x_train.cols; ++f) {
        base_order[f].resize(n);
        std::iota(base_order[f].begin(), base_order[f].end(), 0);
        std::stable_sort(base_order[f].begin(), base_order[f].end(),
                         [&](int a, int b) { return x_train(static_cast<std::size_t>(a), f) < x_train(static_cast<std::size_t>(b), f); });
    }

    std::vector<double> f_train(n, model.base_);
    std::vector<double> f_valid(x_valid.rows, model.base_);
    std::vector<double> residual(n);

    auto valid_mse = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < y_valid.size(); ++i) {
            const double d = y_valid[i] - f_valid[i];
            s += d * d;
        }
        return y_valid.empty() ? 0.0 : s / static_cast<double>(y_valid.size());
    };
    auto train_mse = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = y_train[i] - f_train[i];
            s += d * d;
        }
        return s / static_cast<double>(n);
    };

    double best_mse = valid_mse();  // round 0: mean only
    model.validation_trace_.push_back(best_mse);
    model.training_trace_.push_back(train_mse());
    int best_round = 0;
    int since_best = 0;

    for (int round = 1; round <= spec.max_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y_train[i] - f_train[i];
        detail::TreeBuilder builder(x_train, residual, spec.max_depth, spec.min_leaf);
        detail::Tree tree = builder.build(base_order);
        for (std::size_t i = 0; i < n; ++i) f_train[i] += spec.learning_rate * tree.predict_row(x_train.row(i));
        for (std::size_t i = 0; i < x_valid.rows; ++i)
            f_valid[i] += spec.learning_rate * tree.predict_row(x_valid.row(i));
        model.trees_.push_back(std::move(tree));

        const double mse = valid_mse();
        model.validation_trace_.push_back(mse);
        model.training_trace_.push_back(train_mse());
        if (mse < best_mse - 1e-12) {
            best_mse = mse;
            best_round = round;
            since_best = 0;
        } else if (++since_best >= spec.early_stop_patience) {
            break;
        }
    }
    model.trees_.resize(static_cast<std::size_t>(best_round));
    return model;
}

enum class ResidualMode { kAnm, kLsnm };

struct Residuals {
    std::vector<double> eps_hat;
    ResidualMode mode = ResidualMode::kAnm;
    std::size_t fallback_count = 0;  // LSNM rows with a non-positive variance estimate
};

inline Residuals residualize_anm(const FittedModel& model, const Matrix& x, const std::vector<double>& y) {
    if (x.rows != y.size()) throw std::invalid_argument("residualize_anm: size mismatch");
    Residuals res;
    res.mode = ResidualMode::kAnm;
    res.eps_hat = model.predict(x);
    for (std::size_t i = 0; i < y.size(); ++i) res.eps_hat[i] = y[i] - res.eps_hat[i];
    return res;
}

// Fits E[Y|X] and E[Y^2|X]; no positivity repair here, degeneracy is handled
// at residualization.
inline std::pair<FittedModel, FittedModel> fit_moments(const RegressorSpec& spec, const Matrix& x_train,
                                                       const std::vector<double>& y_train, const Matrix& x_valid,
                                                       const std::vector<double>& y_valid) {
    FittedModel f1 = fit(spec, x_train, y_train, x_valid, y_valid);
    std::vector<double> y2_train(y_train.size()), y2_valid(y_valid.size());
    for (std::size_t i = 0; i < y_train.size(); ++i) y2_train[i] = y_train[i] * y_train[i];
    for (std::size_t i = 0; i < y_valid.size(); ++i) y2_valid[i] = y_valid[i] * y_valid[i];
    FittedModel f2 = fit(spec, x_train, y2_train, x_valid, y2_valid);
    return {std::move(f1), std::move(f2)};
}

// eps_hat_i = (y_i - f1(x_i)) / sqrt(f2(x_i) - f1(x_i)^2) where the variance
// estimate is positive; elsewhere +-big with the sign of y_i - f1(x_i).
inline Residuals residualize_lsnm(const FittedModel& f1, const FittedModel& f2, const Matrix& x,
                                  const std::vector<double>& y, double big = 1e6) {
    if (x.rows != y.size()) throw std::invalid_argument("residualize_lsnm: size mismatch");
    if (!(big > 0.0)) throw std::invalid_argument("residualize_lsnm: big must be positive");
    Residuals res;
    res.mode = ResidualMode::kLsnm;
    const std::vector<double> m1 = f1.predict(x);
    const std::vector<double> m2 = f2.predict(x);
    res.eps_hat.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double num = y[i] - m1[i];
        const double var = m2[i] - m1[i] * m1[i];
        if (var > 0.0) {
            res.eps_hat[i] = num / std::sqrt(var);
        } else {
            res.eps_hat[i] = num >= 0.0 ? big : -big;
            ++res.fallback_count;
        }
    }
    return res;
}

}  // namespace wellspec
