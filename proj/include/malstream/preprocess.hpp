#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "malstream/core.hpp"

namespace malstream {

// Per-feature z-score parameters. Scales are population standard deviations;
// zero-variance features get scale 1 so they map to exact zeros.
struct Scaler {
    std::vector<double> means;
    std::vector<double> scales;

    std::size_t dim() const { return means.size(); }

    FeatureVector apply(const FeatureVector& x) const {
        require_dim(x, means.size(), "scaler");
        FeatureVector out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - means[i]) / scales[i];
        return out;
    }
};

inline Scaler fit_scaler(const std::vector<FeatureVector>& samples) {
    if (samples.size() < 2) throw data_error("scaler: need at least 2 samples");
    const std::size_t n = samples.size();
    const std::size_t d = samples.front().size();

    Scaler s;
    s.means.assign(d, 0.0);
    s.scales.assign(d, 0.0);
    for (const auto& x : samples) {
        require_dim(x, d, "scaler fit");
        for (std::size_t i = 0; i < d; ++i) s.means[i] += x[i];
    }
    for (double& m : s.means) m /= static_cast<double>(n);
    for (const auto& x : samples)
        for (std::size_t i = 0; i < d; ++i) {
            const double c = x[i] - s.means[i];
            s.scales[i] += c * c;
        }
    for (double& v : s.scales) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v == 0.0) v = 1.0;
    }
    return s;
}

// Rows are the top right singular vectors of the centered input, descending
// singular value order, each row signed so its largest-magnitude entry is
// positive.
inline Matrix fit_pca(const std::vector<FeatureVector>& scaled, std::size_t n_components) {
    if (scaled.empty()) throw data_error("pca: empty input");
    const std::size_t n = scaled.size();
    const std::size_t d = scaled.front().size();
    if (n_components < 1 || n_components > std::min(n, d))
        throw data_error("pca: n_components " + std::to_string(n_components) +
                         " out of range [1, " + std::to_string(std::min(n, d)) + "]");

    Eigen::MatrixXd x(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        require_dim(scaled[r], d, "pca fit");
        for (std::size_t c = 0; c < d; ++c) x(r, c) = scaled[r][c];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    if (x.lpNorm<Eigen::Infinity>() == 0.0)
        throw numeric_error("pca: degenerate data, all rows identical");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::MatrixXd& v = svd.matrixV();  // d x min(n, d)

    Matrix components(n_components, d);
    for (std::size_t r = 0; r < n_components; ++r) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < d; ++c)
            if (std::abs(v(c, r)) > std::abs(v(arg, r))) arg = c;
        const double sign = v(arg, r) < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < d; ++c) components(r, c) = sign * v(c, r);
    }
    return components;
}

inline FeatureVector transform_pca(const Matrix& components, const FeatureVector& x) {
    require_dim(x, components.cols, "pca transform");
    FeatureVector out(components.rows, 0.0);
    for (std::size_t r = 0; r < components.rows; ++r) {
        const double* row = components.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < components.cols; ++c) s += row[c] * x[c];
        out[r] = s;
    }
    return out;
}

// Frozen preprocessing: fitted once on training data, immutable afterwards.
// Stream samples only ever pass through transform().
struct PreprocessModel {
    std::vector<double> means;
    std::vector<double> scales;
    Matrix components;  // n_components x input dim
    std::size_t n_components = 0;

    std::size_t input_dim() const { return means.size(); }

    FeatureVector scale(const FeatureVector& x) const {
        return Scaler{means, scales}.apply(x);
    }

    FeatureVector transform(const FeatureVector& x) const {
        return transform_pca(components, scale(x));
    }

    void validate() const {
        if (means.size() != scales.size()) throw data_error("preprocess model: means/scales mismatch");
        if (components.cols != means.size() || components.rows != n_components)
            throw data_error("preprocess model: component shape mismatch");
        if (n_components < 1 || n_components > means.size())
            throw data_error("preprocess model: n_components out of range");
        for (double s : scales)
            if (!(s > 0.0)) throw data_error("preprocess model: non-positive scale");
        for (std::size_t i = 0; i < components.rows; ++i)
            for (std::size_t j = i; j < components.rows; ++j) {
                double dot = 0.0;
                for (std::size_t c = 0; c < components.cols; ++c)
                    dot += components(i, c) * components(j, c);
                const double expect = i == j ? 1.0 : 0.0;
                if (std::abs(dot - expect) > 1e-6)
                    throw data_error("preprocess model: components not orthonormal");
            }
    }
};

inline PreprocessModel fit_preprocess(const std::vector<FeatureVector>& samples,
                                      std::size_t n_components) {
    PreprocessModel m;
    Scaler s = fit_scaler(samples);
    std::vector<FeatureVector> scaled;
    scaled.reserve(samples.size());
    for (const auto& x : samples) scaled.push_back(s.apply(x));
    m.means = std::move(s.means);
    m.scales = std::move(s.scales);
    m.components = fit_pca(scaled, n_components);
    m.n_components = n_components;
    return m;
}

// Picks the grid value whose evaluator score (holdout balanced accuracy) is
// highest; ties go to the smaller component count.
inline std::size_t select_component_count(const std::vector<std::size_t>& grid,
                                          const std::function<double(std::size_t)>& evaluator) {
    if (grid.empty()) throw data_error("component selection: empty grid");
    bool have_best = false;
    std::size_t best_m = 0;
    double best_score = 0.0;
    for (std::size_t m : grid) {
        const double score = evaluator(m);
        if (!have_best || score > best_score || (score == best_score && m < best_m)) {
            have_best = true;
            best_m = m;
            best_score = score;
        }
    }
    return best_m;
}

}  // namespace malstream
