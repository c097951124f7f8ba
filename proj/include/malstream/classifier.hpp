#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "malstream/core.hpp"
#include "malstream/metrics.hpp"
#include "malstream/rng.hpp"

namespace malstream {

enum class Activation { relu, tanh, logistic };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::logistic: return "logistic";
    }
    return "relu";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "logistic") return Activation::logistic;
    throw data_error("unknown activation '" + s + "'");
}

// Feed-forward net with a softmax head. weights[l] maps layer l activations
// (layer_sizes[l]) to layer l+1 pre-activations (layer_sizes[l+1]).
struct MlpModel {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., output
    std::vector<Matrix> weights;           // each out x in
    std::vector<std::vector<double>> biases;
    Activation hidden_activation = Activation::relu;
    double alpha = 1e-4;  // L2 strength used at training time
    std::uint64_t rng_seed = 0;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t n_layers() const { return weights.size(); }

    void validate() const {
        if (layer_sizes.size() < 2) throw data_error("mlp: need input and output layers");
        if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
            throw data_error("mlp: layer count mismatch");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows != layer_sizes[l + 1] || weights[l].cols != layer_sizes[l])
                throw data_error("mlp: weight shape mismatch at layer " + std::to_string(l));
            if (biases[l].size() != layer_sizes[l + 1])
                throw data_error("mlp: bias shape mismatch at layer " + std::to_string(l));
            for (double w : weights[l].data)
                if (!std::isfinite(w)) throw data_error("mlp: non-finite weight");
            for (double b : biases[l])
                if (!std::isfinite(b)) throw data_error("mlp: non-finite bias");
        }
    }
};

namespace detail {

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::logistic: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// Derivative expressed through the activation value itself.
inline double activate_grad(Activation a, double value) {
    switch (a) {
        case Activation::relu: return value > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - value * value;
        case Activation::logistic: return value * (1.0 - value);
    }
    return 1.0;
}

inline void affine(const Matrix& w, const std::vector<double>& b, const std::vector<double>& in,
                   std::vector<double>& out) {
    out.assign(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* row = w.row(r);
        double s = b[r];
        for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * in[c];
        out[r] = s;
    }
}

// Max-subtracted softmax, in place.
inline void softmax(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// Stable cross-entropy of logits against a class index.
inline double cross_entropy_logits(const std::vector<double>& logits, int target) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return std::log(sum) - (logits[static_cast<std::size_t>(target)] - m);
}

}  // namespace detail

inline std::vector<double> predict_proba(const MlpModel& model, const FeatureVector& x) {
    require_dim(x, model.input_dim(), "mlp predict");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        detail::affine(model.weights[l], model.biases[l], cur, next);
        if (l + 1 < model.n_layers())
            for (double& v : next) v = detail::activate(model.hidden_activation, v);
        cur.swap(next);
    }
    detail::softmax(cur);
    for (double p : cur)
        if (!std::isfinite(p)) throw numeric_error("mlp predict: non-finite output, corrupt model");
    return cur;
}

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

// Mean cross-entropy over the batch plus the L2 penalty
// alpha/(2B) * sum of squared weights (biases unpenalized).
inline double mlp_loss(const MlpModel& model, const std::vector<FeatureVector>& x,
                       const std::vector<int>& y) {
    if (x.empty()) throw data_error("mlp loss: empty batch");
    double ce = 0.0;
    std::vector<double> cur, next;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cur.assign(x[i].begin(), x[i].end());
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            detail::affine(model.weights[l], model.biases[l], cur, next);
            if (l + 1 < model.n_layers())
                for (double& v : next) v = detail::activate(model.hidden_activation, v);
            cur.swap(next);
        }
        ce += detail::cross_entropy_logits(cur, y[i]);
    }
    const double batch = static_cast<double>(x.size());
    double penalty = 0.0;
    for (const auto& w : model.weights)
        for (double v : w.data) penalty += v * v;
    return ce / batch + model.alpha * penalty / (2.0 * batch);
}

// Analytic gradient of mlp_loss with respect to every weight and bias.
inline MlpGradients mlp_loss_gradient(const MlpModel& model, const std::vector<FeatureVector>& x,
                                      const std::vector<int>& y, double* loss_out = nullptr) {
    if (x.empty()) throw data_error("mlp gradient: empty batch");
    const std::size_t layers = model.n_layers();
    MlpGradients g;
    g.weights.reserve(layers);
    g.biases.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        g.weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        g.biases.emplace_back(model.biases[l].size(), 0.0);
    }

    const double batch = static_cast<double>(x.size());
    double ce = 0.0;
    std::vector<std::vector<double>> acts(layers + 1);
    std::vector<double> delta, prev_delta;
    for (std::size_t i = 0; i < x.size(); ++i) {
        acts[0].assign(x[i].begin(), x[i].end());
        for (std::size_t l = 0; l < layers; ++l) {
            detail::affine(model.weights[l], model.biases[l], acts[l], acts[l + 1]);
            if (l + 1 < layers)
                for (double& v : acts[l + 1]) v = detail::activate(model.hidden_activation, v);
        }
        ce += detail::cross_entropy_logits(acts[layers], y[i]);

        // softmax + cross-entropy head: delta = (p - onehot) / B
        delta = acts[layers];
        detail::softmax(delta);
        delta[static_cast<std::size_t>(y[i])] -= 1.0;
        for (double& v : delta) v /= batch;

        for (std::size_t l = layers; l-- > 0;) {
            Matrix& dw = g.weights[l];
            const std::vector<double>& in = acts[l];
            for (std::size_t r = 0; r < dw.rows; ++r) {
                double* row = dw.row(r);
                const double d = delta[r];
                for (std::size_t c = 0; c < dw.cols; ++c) row[c] += d * in[c];
                g.biases[l][r] += d;
            }
            if (l == 0) break;
            const Matrix& w = model.weights[l];
            prev_delta.assign(w.cols, 0.0);
            for (std::size_t r = 0; r < w.rows; ++r) {
                const double* row = w.row(r);
                const double d = delta[r];
                for (std::size_t c = 0; c < w.cols; ++c) prev_delta[c] += row[c] * d;
            }
            for (std::size_t c = 0; c < w.cols; ++c)
                prev_delta[c] *= detail::activate_grad(model.hidden_activation, acts[l][c]);
            delta.swap(prev_delta);
        }
    }

    double penalty = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& w = model.weights[l].data;
        auto& dw = g.weights[l].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            dw[i] += model.alpha * w[i] / batch;
            penalty += w[i] * w[i];
        }
    }
    if (loss_out) *loss_out = ce / batch + model.alpha * penalty / (2.0 * batch);
    return g;
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double alpha = 1e-4;
    std::uint64_t seed = 0;
    std::size_t patience = 20;  // 0 disables early stopping
    double validation_fraction = 0.1;

    void validate() const {
        if (epochs < 1) throw data_error("train config: epochs must be >= 1");
        if (batch_size < 1) throw data_error("train config: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw data_error("train config: learning_rate must be > 0");
        if (alpha < 0.0) throw data_error("train config: alpha must be >= 0");
        if (patience > 0 && !(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw data_error("train config: validation_fraction must be in (0, 1)");
    }
};

struct MlpArch {
    std::vector<std::size_t> hidden = {100};
    Activation activation = Activation::relu;
};

// Seeded per-class split. Every class lands in both sides, so holdout scores
// such as balanced accuracy stay well defined.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<int>& labels, std::size_t n_classes, double holdout_fraction,
    std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> train_idx, holdout_idx;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2)
            throw data_error("split: class " + std::to_string(c) +
                             " needs at least 2 samples for a holdout split");
        rng.shuffle(idx);
        std::size_t take = static_cast<std::size_t>(
            std::llround(holdout_fraction * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        holdout_idx.insert(holdout_idx.end(), idx.begin(), idx.begin() + take);
        train_idx.insert(train_idx.end(), idx.begin() + take, idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(holdout_idx.begin(), holdout_idx.end());
    return {std::move(train_idx), std::move(holdout_idx)};
}

namespace detail {

inline MlpModel init_mlp(std::size_t input_dim, std::size_t output_dim, const MlpArch& arch,
                         double alpha, std::uint64_t seed) {
    MlpModel m;
    m.layer_sizes.push_back(input_dim);
    for (std::size_t h : arch.hidden)
        if (h > 0) m.layer_sizes.push_back(h);
    m.layer_sizes.push_back(output_dim);
    m.hidden_activation = arch.activation;
    m.alpha = alpha;
    m.rng_seed = seed;

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const std::size_t fan_in = m.layer_sizes[l];
        const std::size_t fan_out = m.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

struct AdamState {
    std::vector<Matrix> mw, vw;
    std::vector<std::vector<double>> mb, vb;
    std::size_t step = 0;

    explicit AdamState(const MlpModel& model) {
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            mw.emplace_back(model.weights[l].rows, model.weights[l].cols);
            vw.emplace_back(model.weights[l].rows, model.weights[l].cols);
            mb.emplace_back(model.biases[l].size(), 0.0);
            vb.emplace_back(model.biases[l].size(), 0.0);
        }
    }

    void apply(MlpModel& model, const MlpGradients& g, double lr) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t l = 0; l < model.n_layers(); ++l) {
            auto update = [&](double& param, double& m, double& v, double grad) {
                m = beta1 * m + (1.0 - beta1) * grad;
                v = beta2 * v + (1.0 - beta2) * grad * grad;
                param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
            };
            auto& w = model.weights[l].data;
            for (std::size_t i = 0; i < w.size(); ++i)
                update(w[i], mw[l].data[i], vw[l].data[i], g.weights[l].data[i]);
            auto& b = model.biases[l];
            for (std::size_t i = 0; i < b.size(); ++i)
                update(b[i], mb[l][i], vb[l][i], g.biases[l][i]);
        }
    }
};

inline double mean_cross_entropy(const MlpModel& model, const std::vector<FeatureVector>& x,
                                 const std::vector<int>& y) {
    double ce = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto p = predict_proba(model, x[i]);
        ce += -std::log(std::max(p[static_cast<std::size_t>(y[i])], 1e-300));
    }
    return ce / static_cast<double>(x.size());
}

}  // namespace detail

// Minimizes cross-entropy + L2 with adam over seeded shuffled mini-batches.
// Deterministic for a fixed config and dataset. With patience > 0 a stratified
// validation split drives early stopping and the best-validation parameters
// are returned; otherwise the final-epoch parameters are.
inline MlpModel train_mlp(const std::vector<FeatureVector>& x, const std::vector<int>& y,
                          std::size_t n_classes, const MlpArch& arch, const TrainConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw data_error("mlp train: empty dataset");
    if (x.size() != y.size()) throw data_error("mlp train: samples/labels length mismatch");
    if (n_classes < 2) throw data_error("mlp train: k >= 2 required");
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= n_classes)
            throw data_error("mlp train: label out of range");

    std::vector<std::size_t> train_idx(x.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::vector<std::size_t> val_idx;
    if (cfg.patience > 0) {
        auto [tr, val] = stratified_split(y, n_classes, cfg.validation_fraction, cfg.seed);
        train_idx = std::move(tr);
        val_idx = std::move(val);
    }

    std::vector<FeatureVector> val_x;
    std::vector<int> val_y;
    for (std::size_t i : val_idx) {
        val_x.push_back(x[i]);
        val_y.push_back(y[i]);
    }

    MlpModel model = detail::init_mlp(x.front().size(), n_classes, arch, cfg.alpha, cfg.seed);
    detail::AdamState adam(model);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    std::vector<FeatureVector> batch_x;
    std::vector<int> batch_y;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(train_idx);
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, train_idx.size());
            batch_x.clear();
            batch_y.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_x.push_back(x[train_idx[i]]);
                batch_y.push_back(y[train_idx[i]]);
            }
            double loss = 0.0;
            const MlpGradients g = mlp_loss_gradient(model, batch_x, batch_y, &loss);
            if (!std::isfinite(loss))
                throw numeric_error("mlp train: diverged at epoch " + std::to_string(epoch));
            adam.apply(model, g, cfg.learning_rate);
        }

        if (cfg.patience > 0) {
            const double val_loss = detail::mean_cross_entropy(model, val_x, val_y);
            if (!std::isfinite(val_loss))
                throw numeric_error("mlp train: diverged at epoch " + std::to_string(epoch));
            if (val_loss < best_val - 1e-7) {
                best_val = val_loss;
                best = model;
                stale_epochs = 0;
            } else if (++stale_epochs >= cfg.patience) {
                return best;
            }
        }
    }
    return cfg.patience > 0 ? best : model;
}

inline MlpModel train_mlp(const LabeledDataset& data, const MlpArch& arch, const TrainConfig& cfg) {
    return train_mlp(data.samples, data.labels, data.num_classes(), arch, cfg);
}

// k independent binary heads; model i separates class i (positive, output
// index 1) from the rest (output index 0).
struct OneVsRestEnsemble {
    std::vector<MlpModel> models;

    std::size_t num_classes() const { return models.size(); }
    std::size_t input_dim() const { return models.front().input_dim(); }
};

inline OneVsRestEnsemble train_one_vs_rest(const std::vector<FeatureVector>& x,
                                           const std::vector<int>& y, std::size_t n_classes,
                                           const MlpArch& arch, const TrainConfig& cfg) {
    if (n_classes < 2) throw data_error("one-vs-rest: k >= 2 required");
    OneVsRestEnsemble ensemble;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<int> binary(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            binary[i] = y[i] == static_cast<int>(c) ? 1 : 0;
        TrainConfig per_class = cfg;
        per_class.seed = cfg.seed + c;
        ensemble.models.push_back(train_mlp(x, binary, 2, arch, per_class));
    }
    return ensemble;
}

// p'_i = positive-class output of model i. Entries are independent and need
// not sum to 1.
inline std::vector<double> predict_proba_ovr(const OneVsRestEnsemble& ensemble,
                                             const FeatureVector& x) {
    std::vector<double> p(ensemble.models.size());
    for (std::size_t i = 0; i < ensemble.models.size(); ++i)
        p[i] = predict_proba(ensemble.models[i], x)[1];
    return p;
}

// Balanced accuracy of argmax predictions. Works for the multiclass model and
// the one-vs-rest vector alike through the callable.
template <typename PredictFn>
double prediction_bac(PredictFn&& predict, const std::vector<FeatureVector>& x,
                      const std::vector<int>& y, std::size_t n_classes) {
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::vector<double> p = predict(x[i]);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < p.size(); ++j)
            if (p[j] > p[arg]) arg = j;
        cm.add(y[i], static_cast<int>(arg));
    }
    return balanced_accuracy(cm);
}

struct GridPoint {
    std::vector<std::size_t> hidden;
    Activation activation = Activation::relu;
    double alpha = 1e-4;
};

struct GridSearchEntry {
    GridPoint point;
    double holdout_bac = 0.0;
};

struct GridSearchResult {
    MlpModel best;  // refit on the full dataset
    std::size_t best_index = 0;
    std::vector<GridSearchEntry> report;
};

// Exhaustive search over the grid, scored by holdout balanced accuracy under
// a shared seeded split. Ties keep the earliest grid entry.
inline GridSearchResult grid_search(const std::vector<FeatureVector>& x, const std::vector<int>& y,
                                    std::size_t n_classes, const std::vector<GridPoint>& grid,
                                    const TrainConfig& base, double holdout_fraction = 0.2) {
    if (grid.empty()) throw data_error("grid search: empty grid");
    auto [train_idx, holdout_idx] = stratified_split(y, n_classes, holdout_fraction, base.seed);
    std::vector<FeatureVector> tx, hx;
    std::vector<int> ty, hy;
    for (std::size_t i : train_idx) {
        tx.push_back(x[i]);
        ty.push_back(y[i]);
    }
    for (std::size_t i : holdout_idx) {
        hx.push_back(x[i]);
        hy.push_back(y[i]);
    }

    GridSearchResult result;
    double best_bac = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        TrainConfig cfg = base;
        cfg.alpha = grid[g].alpha;
        MlpArch arch{grid[g].hidden, grid[g].activation};
        const MlpModel candidate = train_mlp(tx, ty, n_classes, arch, cfg);
        const double bac = prediction_bac(
            [&](const FeatureVector& v) { return predict_proba(candidate, v); }, hx, hy, n_classes);
        result.report.push_back({grid[g], bac});
        if (bac > best_bac) {
            best_bac = bac;
            result.best_index = g;
        }
    }

    const GridPoint& winner = grid[result.best_index];
    TrainConfig cfg = base;
    cfg.alpha = winner.alpha;
    result.best = train_mlp(x, y, n_classes, MlpArch{winner.hidden, winner.activation}, cfg);
    return result;
}

}  // namespace malstream
