#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "malstream/core.hpp"

namespace malstream {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {
        if (k < 1) throw data_error("confusion matrix: k must be >= 1");
    }

    void add(int true_class, int predicted_class) {
        if (true_class < 0 || static_cast<std::size_t>(true_class) >= k_ ||
            predicted_class < 0 || static_cast<std::size_t>(predicted_class) >= k_)
            throw data_error("confusion matrix: class index out of range");
        ++counts_[static_cast<std::size_t>(true_class) * k_ +
                  static_cast<std::size_t>(predicted_class)];
    }

    std::size_t k() const { return k_; }
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts_[t * k_ + p]; }

    std::uint64_t row_sum(std::size_t t) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < k_; ++p) s += at(t, p);
        return s;
    }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts_) s += c;
        return s;
    }

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

// Mean of per-class recalls. Robust to class imbalance.
inline double balanced_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cm.k(); ++i) {
        const std::uint64_t row = cm.row_sum(i);
        if (row == 0)
            throw data_error("balanced accuracy: class " + std::to_string(i) +
                             " has no true samples");
        sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(row);
    }
    return sum / static_cast<double>(cm.k());
}

// Parallel per-sample views of one clustering: who went where, what it truly
// was, and where it sits in feature space.
struct ClusteringEvalInput {
    std::vector<std::size_t> assignments;  // sample -> cluster id
    std::vector<int> true_labels;          // sample -> class id
    std::vector<FeatureVector> points;

    void validate() const {
        if (assignments.size() != true_labels.size() || assignments.size() != points.size())
            throw data_error("clustering eval: assignments, labels and points differ in length");
    }
};

namespace detail {

inline std::size_t max_cluster_id(const std::vector<std::size_t>& assignments) {
    std::size_t m = 0;
    for (auto a : assignments) m = std::max(m, a);
    return m;
}

inline double euclidean(const FeatureVector& a, const FeatureVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace detail

// Weighted majority-class fraction: (1/n) * sum_j max_i count(class i in cluster j).
inline double purity(const ClusteringEvalInput& input) {
    input.validate();
    const std::size_t n = input.assignments.size();
    if (n == 0) throw data_error("purity: empty input");

    int max_label = 0;
    for (int y : input.true_labels) {
        if (y < 0) throw data_error("purity: negative class label");
        max_label = std::max(max_label, y);
    }
    const std::size_t n_clusters = detail::max_cluster_id(input.assignments) + 1;
    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

    std::vector<std::uint64_t> counts(n_clusters * n_classes, 0);
    for (std::size_t i = 0; i < n; ++i)
        ++counts[input.assignments[i] * n_classes + static_cast<std::size_t>(input.true_labels[i])];

    std::uint64_t majority_total = 0;
    for (std::size_t j = 0; j < n_clusters; ++j) {
        std::uint64_t best = 0;
        for (std::size_t c = 0; c < n_classes; ++c)
            best = std::max(best, counts[j * n_classes + c]);
        majority_total += best;
    }
    return static_cast<double>(majority_total) / static_cast<double>(n);
}

// Mean silhouette over all samples, Euclidean distances. Samples in singleton
// clusters contribute 0, as does the degenerate a=b=0 case.
inline double silhouette(const ClusteringEvalInput& input) {
    input.validate();
    const std::size_t n = input.assignments.size();
    if (n == 0) throw data_error("silhouette: empty input");

    const std::size_t n_clusters = detail::max_cluster_id(input.assignments) + 1;
    std::vector<std::uint64_t> cluster_sizes(n_clusters, 0);
    for (auto a : input.assignments) ++cluster_sizes[a];
    std::size_t nonempty = 0;
    for (auto s : cluster_sizes)
        if (s > 0) ++nonempty;
    if (nonempty < 2) throw data_error("silhouette: needs at least 2 non-empty clusters");

    double total = 0.0;
    std::vector<double> dist_sum(n_clusters);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = input.assignments[i];
        if (cluster_sizes[own] == 1) continue;  // singleton convention: s = 0

        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[input.assignments[j]] += detail::euclidean(input.points[i], input.points[j]);
        }

        const double a = dist_sum[own] / static_cast<double>(cluster_sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (c == own || cluster_sizes[c] == 0) continue;
            b = std::min(b, dist_sum[c] / static_cast<double>(cluster_sizes[c]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

// Sum of squared distances from each point to the centroid it was assigned to.
inline double wcss(const std::vector<std::size_t>& assignments,
                   const std::vector<FeatureVector>& points,
                   const std::vector<FeatureVector>& centroids) {
    if (assignments.size() != points.size())
        throw data_error("wcss: assignments and points differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (assignments[i] >= centroids.size())
            throw data_error("wcss: assignment references missing centroid " +
                             std::to_string(assignments[i]));
        const FeatureVector& c = centroids[assignments[i]];
        double s = 0.0;
        for (std::size_t d = 0; d < points[i].size(); ++d) {
            const double diff = points[i][d] - c[d];
            s += diff * diff;
        }
        total += s;
    }
    return total;
}

}  // namespace malstream
