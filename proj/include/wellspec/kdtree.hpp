#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "wellspec/common.hpp"

namespace wellspec {

// Bucketed k-d tree over the rows of a point matrix. Queries are exact and
// deterministic: equal-distance candidates are all reported (min_distance_set)
// or broken by lowest index (knn), so results never depend on build or
// traversal order beyond the data itself.
class KdTree {
  public:
    explicit KdTree(const Matrix& pts) : pts_(pts), dim_(pts.cols) {
        idx_.resize(pts.rows);
        for (std::size_t i = 0; i < pts.rows; ++i) idx_[i] = static_cast<int>(i);
        nodes_.reserve(pts.rows / kLeafSize * 2 + 4);
        if (pts.rows > 0) root_ = build(0, static_cast<int>(pts.rows));
    }

    // All row indices (ascending) at exactly the minimum distance from q,
    // excluding `exclude`. Returns the minimal squared distance.
    double min_distance_set(const double* q, int exclude, std::vector<int>& out) const {
        out.clear();
        double best = std::numeric_limits<double>::infinity();
        search_min(root_, q, exclude, best, out);
        std::sort(out.begin(), out.end());
        return best;
    }

    // k nearest rows by (distance, index) order.
    void knn(const double* q, std::size_t k, std::vector<int>& out) const {
        out.clear();
        std::vector<std::pair<double, int>> heap;  // max-heap on (d2, idx)
        heap.reserve(k + 1);
        search_knn(root_, q, k, heap);
        std::sort(heap.begin(), heap.end());
        for (auto& e : heap) out.push_back(e.second);
    }

  private:
    static constexpr int kLeafSize = 16;

    struct Node {
        int split_dim = -1;   // -1 marks a leaf
        double split_val = 0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into idx_
    };

    int build(int begin, int end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size()) - 1;
        }
        // split on the widest dimension at the median
        int dim = 0;
        double widest = -1.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int t = begin; t < end; ++t) {
                const double v = pts_(static_cast<std::size_t>(idx_[t]), j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > widest) {
                widest = hi - lo;
                dim = static_cast<int>(j);
            }
        }
        if (widest <= 0.0) {  // all points identical: keep as one leaf
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size()) - 1;
        }
        const int mid = (begin + end) / 2;
        std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                         [&](int a, int b) {
                             return pts_(static_cast<std::size_t>(a), static_cast<std::size_t>(dim)) <
                                    pts_(static_cast<std::size_t>(b), static_cast<std::size_t>(dim));
                         });
        node.split_dim = dim;
        node.split_val = pts_(static_cast<std::size_t>(idx_[mid]), static_cast<std::size_t>(dim));
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return self;
    }

    void search_min(int ni, const double* q, int exclude, double& best, std::vector<int>& out) const {
        const Node& node = nodes_[ni];
        if (node.split_dim < 0) {
            for (int t = node.begin; t < node.end; ++t) {
                const int i = idx_[t];
                if (i == exclude) continue;
                const double d2 = squared_distance(q, pts_.row(static_cast<std::size_t>(i)), dim_);
                if (d2 < best) {
                    best = d2;
                    out.clear();
                    out.push_back(i);
                } else if (d2 == best) {
                    out.push_back(i);
                }
            }
            return;
        }
        const double diff = q[node.split_dim] - node.split_val;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search_min(near, q, exclude, best, out);
        // ties at exactly best must not be pruned, hence strict >
        if (diff * diff > best) return;
        search_min(far, q, exclude, best, out);
    }

    void search_knn(int ni, const double* q, std::size_t k,
                    std::vector<std::pair<double, int>>& heap) const {
        const Node& node = nodes_[ni];
        if (node.split_dim < 0) {
            for (int t = node.begin; t < node.end; ++t) {
                const int i = idx_[t];
                const double d2 = squared_distance(q, pts_.row(static_cast<std::size_t>(i)), dim_);
                const std::pair<double, int> cand{d2, i};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end());
                } else if (cand < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        const double diff = q[node.split_dim] - node.split_val;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search_knn(near, q, k, heap);
        if (heap.size() < k || diff * diff <= heap.front().first) search_knn(far, q, k, heap);
    }

    const Matrix& pts_;
    std::size_t dim_;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace wellspec
