#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace malstream {

// Bad or inconsistent input (files, dimensions, labels). CLI exit code 2.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure (divergence, degenerate decomposition). CLI exit code 3.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One sample: fixed-length vector of finite feature values.
using FeatureVector = std::vector<double>;

inline bool all_finite(const FeatureVector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_dim(const FeatureVector& x, std::size_t dim, const char* where) {
    if (x.size() != dim)
        throw data_error(std::string(where) + ": dimension mismatch, expected " +
                         std::to_string(dim) + ", got " + std::to_string(x.size()));
}

// Dense row-major matrix. Small helper, not a linear-algebra library.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }
};

// Labeled training data. Labels are dense class indices into class_names,
// assigned in order of first appearance in the source file.
struct LabeledDataset {
    std::vector<FeatureVector> samples;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
    std::size_t num_classes() const { return class_names.size(); }

    void validate() const {
        if (samples.size() != labels.size())
            throw data_error("dataset: samples and labels differ in length");
        const int k = static_cast<int>(class_names.size());
        std::vector<bool> seen(class_names.size(), false);
        for (int y : labels) {
            if (y < 0 || y >= k)
                throw data_error("dataset: label index " + std::to_string(y) + " out of range");
            seen[static_cast<std::size_t>(y)] = true;
        }
        for (std::size_t c = 0; c < seen.size(); ++c)
            if (!seen[c])
                throw data_error("dataset: class '" + class_names[c] + "' has no samples");
        const std::size_t d = dim();
        for (const auto& s : samples) {
            if (s.size() != d) throw data_error("dataset: inconsistent sample dimension");
            if (!all_finite(s)) throw data_error("dataset: non-finite feature value");
        }
    }
};

// Stream payload as loaded from disk. Labels, when present, are held out for
// evaluation only; pipeline decisions never read them.
struct StreamData {
    std::vector<FeatureVector> samples;
    std::vector<std::string> feature_names;
    std::vector<int> labels;  // empty when the stream is unlabeled
    std::vector<std::string> label_names;

    bool has_labels() const { return !labels.empty(); }
    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
};

// Single-pass cursor over a stream. next() yields each sample exactly once in
// order and returns nullptr at exhaustion; asking again after that is a
// contract violation and throws.
class StreamSource {
public:
    explicit StreamSource(StreamData data) : data_(std::move(data)) {}

    std::size_t size() const { return data_.size(); }
    std::size_t dim() const { return data_.dim(); }

    const FeatureVector* next() {
        if (done_)
            throw data_error("stream: already exhausted, a second pass is not allowed");
        if (cursor_ >= data_.samples.size()) {
            done_ = true;
            return nullptr;
        }
        return &data_.samples[cursor_++];
    }

    bool exhausted() const { return done_; }

    // Held-out channel, for evaluation only.
    bool has_labels() const { return data_.has_labels(); }
    const std::vector<int>& held_out_labels() const { return data_.labels; }
    const std::vector<std::string>& label_names() const { return data_.label_names; }

private:
    StreamData data_;
    std::size_t cursor_ = 0;
    bool done_ = false;
};

enum class DecisionKind { classified, clustered };

// Outcome for one stream sample: routed to a known family (classified) or
// into the online clusterer (clustered).
struct DecisionRecord {
    std::size_t sample_index = 0;
    DecisionKind kind = DecisionKind::classified;
    std::optional<int> family_index;
    std::optional<std::size_t> cluster_id;
    double max_probability = 0.0;
    std::vector<double> probability_vector;

    static DecisionRecord classified(std::size_t index, int family, double max_p,
                                     std::vector<double> probs) {
        DecisionRecord r;
        r.sample_index = index;
        r.kind = DecisionKind::classified;
        r.family_index = family;
        r.max_probability = max_p;
        r.probability_vector = std::move(probs);
        return r;
    }

    static DecisionRecord clustered(std::size_t index, std::size_t cluster, double max_p,
                                    std::vector<double> probs) {
        DecisionRecord r;
        r.sample_index = index;
        r.kind = DecisionKind::clustered;
        r.cluster_id = cluster;
        r.max_probability = max_p;
        r.probability_vector = std::move(probs);
        return r;
    }
};

}  // namespace malstream
