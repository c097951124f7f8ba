#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "malstream/classifier.hpp"
#include "malstream/clustering.hpp"
#include "malstream/core.hpp"
#include "malstream/gate.hpp"
#include "malstream/io.hpp"
#include "malstream/metrics.hpp"
#include "malstream/model_io.hpp"
#include "malstream/preprocess.hpp"
#include "malstream/synth.hpp"

namespace malstream {

// Optional exhaustive hyperparameter grid for training.
struct MlpGridSpec {
    std::vector<std::vector<std::size_t>> hidden_layer_sizes;
    std::vector<Activation> activations;
    std::vector<double> alphas;

    bool empty() const { return hidden_layer_sizes.empty(); }

    std::vector<GridPoint> expand() const {
        std::vector<GridPoint> points;
        for (const auto& h : hidden_layer_sizes)
            for (Activation a : activations)
                for (double alpha : alphas) points.push_back({h, a, alpha});
        return points;
    }
};

struct PreprocessSpec {
    std::size_t n_components = 0;     // 0 means full rank: min(n - 1, d)
    std::vector<std::size_t> grid;    // nonempty: pick by holdout BAC
};

struct PipelineConfig {
    GateMethod method = GateMethod::single;
    double threshold = 0.6;
    std::uint64_t seed = 42;
    PreprocessSpec preprocess;
    MlpArch arch;
    TrainConfig train;
    MlpGridSpec mlp_grid;
    ClustererConfig clusterer;

    void validate() const {
        if (threshold < 0.0 || threshold > 1.0)
            throw data_error("config: threshold must be in [0, 1]");
        train.validate();
    }
};

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    try {
        if (j.contains("method")) cfg.method = gate_method_from_string(j.at("method"));
        if (j.contains("threshold")) cfg.threshold = j.at("threshold").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.train.seed = cfg.seed;
        cfg.clusterer.seed = cfg.seed;

        if (j.contains("preprocess")) {
            const auto& p = j.at("preprocess");
            if (p.contains("n_components"))
                cfg.preprocess.n_components = p.at("n_components").get<std::size_t>();
            if (p.contains("grid"))
                cfg.preprocess.grid = p.at("grid").get<std::vector<std::size_t>>();
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            if (t.contains("hidden_layers"))
                cfg.arch.hidden = t.at("hidden_layers").get<std::vector<std::size_t>>();
            if (t.contains("activation"))
                cfg.arch.activation = activation_from_string(t.at("activation"));
            if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<std::size_t>();
            if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
            if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
            if (t.contains("alpha")) cfg.train.alpha = t.at("alpha").get<double>();
            if (t.contains("patience")) cfg.train.patience = t.at("patience").get<std::size_t>();
            if (t.contains("validation_fraction"))
                cfg.train.validation_fraction = t.at("validation_fraction").get<double>();
            if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
            if (t.contains("grid")) {
                const auto& g = t.at("grid");
                cfg.mlp_grid.hidden_layer_sizes =
                    g.at("hidden_layer_sizes").get<std::vector<std::vector<std::size_t>>>();
                for (const auto& a : g.at("activation"))
                    cfg.mlp_grid.activations.push_back(activation_from_string(a));
                cfg.mlp_grid.alphas = g.at("alpha").get<std::vector<double>>();
            }
        }
        if (j.contains("clusterer")) {
            const auto& c = j.at("clusterer");
            if (c.contains("algorithm")) cfg.clusterer.algorithm = c.at("algorithm").get<std::string>();
            if (c.contains("clusters")) cfg.clusterer.clusters = c.at("clusters").get<std::size_t>();
            if (c.contains("theta")) cfg.clusterer.theta = c.at("theta").get<double>();
            if (c.contains("q")) cfg.clusterer.q = c.at("q").get<std::size_t>();
            if (c.contains("alpha0")) cfg.clusterer.alpha0 = c.at("alpha0").get<double>();
            if (c.contains("sigma0")) cfg.clusterer.sigma0 = c.at("sigma0").get<double>();
            if (c.contains("decay")) cfg.clusterer.decay = c.at("decay").get<double>();
            if (c.contains("schedule")) cfg.clusterer.schedule = c.at("schedule").get<std::string>();
            if (c.contains("topology")) cfg.clusterer.topology = c.at("topology").get<std::string>();
            if (c.contains("grid_rows")) cfg.clusterer.grid_rows = c.at("grid_rows").get<std::size_t>();
            if (c.contains("grid_cols")) cfg.clusterer.grid_cols = c.at("grid_cols").get<std::size_t>();
            if (c.contains("okm_init")) cfg.clusterer.okm_init = c.at("okm_init").get<std::string>();
            if (c.contains("seed")) cfg.clusterer.seed = c.at("seed").get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::ordered_json config_echo(const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    j["method"] = to_string(cfg.method);
    j["threshold"] = cfg.threshold;
    j["seed"] = cfg.seed;
    j["preprocess"] = {{"n_components", cfg.preprocess.n_components},
                       {"grid", cfg.preprocess.grid}};
    j["train"] = {{"hidden_layers", cfg.arch.hidden},
                  {"activation", to_string(cfg.arch.activation)},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"alpha", cfg.train.alpha},
                  {"patience", cfg.train.patience},
                  {"validation_fraction", cfg.train.validation_fraction},
                  {"seed", cfg.train.seed}};
    j["clusterer"] = {{"algorithm", cfg.clusterer.algorithm},
                      {"clusters", cfg.clusterer.clusters},
                      {"theta", cfg.clusterer.theta},
                      {"q", cfg.clusterer.q},
                      {"alpha0", cfg.clusterer.alpha0},
                      {"sigma0", cfg.clusterer.sigma0},
                      {"decay", cfg.clusterer.decay},
                      {"schedule", cfg.clusterer.schedule},
                      {"topology", cfg.clusterer.topology},
                      {"okm_init", cfg.clusterer.okm_init},
                      {"seed", cfg.clusterer.seed}};
    return j;
}

struct RunSummary {
    std::size_t n_classified = 0;
    std::size_t n_clustered = 0;
    double pct_classified = 0.0;  // fraction of the stream, in [0, 1]
    std::optional<double> bac;
    std::optional<double> purity_score;
    std::optional<double> silhouette_score;
    std::optional<double> wcss_score;
    double train_seconds = 0.0;
    double classify_seconds = 0.0;
    double cluster_seconds = 0.0;
    nlohmann::ordered_json config;
};

// The canonical summary document. Timings are deliberately kept out of it so
// repeated runs of the same seeded config serialize byte-identically; they
// are reported on the console instead.
inline nlohmann::ordered_json summary_to_json(const RunSummary& s) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["bac"] = opt(s.bac);
    j["purity"] = opt(s.purity_score);
    j["silhouette"] = opt(s.silhouette_score);
    j["wcss"] = opt(s.wcss_score);
    j["n_classified"] = s.n_classified;
    j["n_clustered"] = s.n_clustered;
    j["pct_classified"] = s.pct_classified;
    j["config"] = s.config;
    return j;
}

struct TrainOutcome {
    TrainedModel model;
    double training_bac = 0.0;
    double seconds = 0.0;
    std::vector<GridSearchEntry> grid_report;
    std::vector<std::pair<std::size_t, double>> component_report;  // (m, holdout BAC)
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<FeatureVector> transform_all(const PreprocessModel& pre,
                                                const std::vector<FeatureVector>& samples) {
    std::vector<FeatureVector> out;
    out.reserve(samples.size());
    for (const auto& x : samples) out.push_back(pre.transform(x));
    return out;
}

// Holdout BAC of a full scaler+PCA+MLP fit at a candidate component count.
inline double component_candidate_bac(const LabeledDataset& data, std::size_t m,
                                      const MlpArch& arch, const TrainConfig& cfg) {
    auto [train_idx, holdout_idx] = stratified_split(data.labels, data.num_classes(), 0.2, cfg.seed);
    std::vector<FeatureVector> tx;
    std::vector<int> ty;
    for (std::size_t i : train_idx) {
        tx.push_back(data.samples[i]);
        ty.push_back(data.labels[i]);
    }
    const PreprocessModel pre = fit_preprocess(tx, m);
    const MlpModel model = train_mlp(transform_all(pre, tx), ty, data.num_classes(), arch, cfg);
    ConfusionMatrix cm(data.num_classes());
    for (std::size_t i : holdout_idx) {
        const auto p = predict_proba(model, pre.transform(data.samples[i]));
        std::size_t arg = 0;
        for (std::size_t c = 1; c < p.size(); ++c)
            if (p[c] > p[arg]) arg = c;
        cm.add(data.labels[i], static_cast<int>(arg));
    }
    return balanced_accuracy(cm);
}

}  // namespace detail

// Fit scaler -> PCA -> classifier(s) on labeled data, per the config.
inline TrainOutcome run_train(const PipelineConfig& cfg, const LabeledDataset& data) {
    const auto t0 = std::chrono::steady_clock::now();
    data.validate();
    if (data.num_classes() < 2) throw data_error("train: k >= 2 required");
    if (data.size() < 2) throw data_error("train: need at least 2 samples");

    TrainOutcome out;
    std::size_t m = cfg.preprocess.n_components;
    if (!cfg.preprocess.grid.empty()) {
        for (std::size_t candidate : cfg.preprocess.grid)
            if (candidate < 1 || candidate > data.dim())
                throw data_error("preprocess grid: candidate " + std::to_string(candidate) +
                                 " out of range");
        m = select_component_count(cfg.preprocess.grid, [&](std::size_t candidate) {
            const double bac = detail::component_candidate_bac(data, candidate, cfg.arch, cfg.train);
            out.component_report.emplace_back(candidate, bac);
            return bac;
        });
    } else if (m == 0) {
        m = std::min(data.size() - 1, data.dim());
    }

    TrainedModel model;
    model.preprocess = fit_preprocess(data.samples, m);
    model.class_names = data.class_names;
    const std::vector<FeatureVector> tx = detail::transform_all(model.preprocess, data.samples);

    if (cfg.method == GateMethod::single) {
        model.kind = "single";
        if (!cfg.mlp_grid.empty()) {
            GridSearchResult gs = grid_search(tx, data.labels, data.num_classes(),
                                              cfg.mlp_grid.expand(), cfg.train);
            out.grid_report = std::move(gs.report);
            model.models.push_back(std::move(gs.best));
        } else {
            model.models.push_back(train_mlp(tx, data.labels, data.num_classes(), cfg.arch, cfg.train));
        }
    } else {
        model.kind = "ovr";
        OneVsRestEnsemble ens =
            train_one_vs_rest(tx, data.labels, data.num_classes(), cfg.arch, cfg.train);
        model.models = std::move(ens.models);
    }
    model.validate();

    out.training_bac = prediction_bac(
        [&](const FeatureVector& x) { return model.predict_transformed(x); }, tx, data.labels,
        data.num_classes());
    out.seconds = detail::seconds_since(t0);
    out.model = std::move(model);
    return out;
}

struct StreamResult {
    std::vector<DecisionRecord> decisions;
    RunSummary summary;
    // clustered-subset snapshot, in consumption order
    std::vector<FeatureVector> clustered_points;
    std::vector<std::size_t> clustered_assignments;
    std::vector<int> clustered_labels;  // stream label ids; empty when unlabeled
    std::vector<FeatureVector> final_centers;
};

namespace detail {

// BAC over classified samples whose true family is one the model was trained
// on, restricted to trained families that actually appear there. Novel-family
// samples have no row in a k x k matrix and are scored by the clustering
// metrics instead.
inline std::optional<double> classified_bac(const TrainedModel& model,
                                            const std::vector<DecisionRecord>& decisions,
                                            const std::vector<int>& stream_labels,
                                            const std::vector<std::string>& stream_label_names) {
    std::unordered_map<std::string, int> trained_index;
    for (std::size_t i = 0; i < model.class_names.size(); ++i)
        trained_index.emplace(model.class_names[i], static_cast<int>(i));

    std::vector<std::uint64_t> hits(model.num_classes(), 0);
    std::vector<std::uint64_t> totals(model.num_classes(), 0);
    for (const auto& r : decisions) {
        if (r.kind != DecisionKind::classified) continue;
        const std::string& name =
            stream_label_names[static_cast<std::size_t>(stream_labels[r.sample_index])];
        const auto it = trained_index.find(name);
        if (it == trained_index.end()) continue;
        const auto c = static_cast<std::size_t>(it->second);
        ++totals[c];
        if (*r.family_index == it->second) ++hits[c];
    }

    double recall_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < totals.size(); ++c) {
        if (totals[c] == 0) continue;
        recall_sum += static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
        ++present;
    }
    if (present == 0) return std::nullopt;
    return recall_sum / static_cast<double>(present);
}

inline void fill_cluster_metrics(RunSummary& summary, const StreamResult& result) {
    if (result.clustered_points.empty()) return;
    summary.wcss_score =
        wcss(result.clustered_assignments, result.clustered_points, result.final_centers);
    if (!result.clustered_labels.empty()) {
        ClusteringEvalInput input{result.clustered_assignments, result.clustered_labels,
                                  result.clustered_points};
        summary.purity_score = purity(input);
        try {
            summary.silhouette_score = silhouette(input);
        } catch (const data_error&) {
            // fewer than 2 non-empty clusters: undefined, reported as null
        }
    } else {
        ClusteringEvalInput input{result.clustered_assignments,
                                  std::vector<int>(result.clustered_points.size(), 0),
                                  result.clustered_points};
        try {
            summary.silhouette_score = silhouette(input);
        } catch (const data_error&) {
        }
    }
}

}  // namespace detail

// One pass over the stream: scale, project, predict, gate, then classify or
// feed the online clusterer, in arrival order with no buffering.
inline StreamResult run_stream(const PipelineConfig& cfg, const TrainedModel& model,
                               StreamSource& stream) {
    cfg.validate();
    auto clusterer = make_clusterer(cfg.clusterer, model.preprocess.n_components);
    const GateConfig gate_cfg{cfg.threshold, cfg.method};

    StreamResult result;
    const bool labeled = stream.has_labels();
    std::size_t index = 0;
    double classify_s = 0.0, cluster_s = 0.0;

    while (true) {
        const FeatureVector* x = stream.next();
        if (!x) break;
        const auto t0 = std::chrono::steady_clock::now();
        FeatureVector z = model.preprocess.transform(*x);
        std::vector<double> p = model.predict_transformed(z);
        const GateDecision g = gate(p, gate_cfg);
        classify_s += detail::seconds_since(t0);

        if (g.high_confidence) {
            result.decisions.push_back(DecisionRecord::classified(
                index, static_cast<int>(g.argmax_index), g.max_value, std::move(p)));
        } else {
            const auto t1 = std::chrono::steady_clock::now();
            const ClusterAssignment a = clusterer->consume(z);
            cluster_s += detail::seconds_since(t1);
            result.decisions.push_back(
                DecisionRecord::clustered(index, a.cluster_id, g.max_value, std::move(p)));
            result.clustered_points.push_back(std::move(z));
            result.clustered_assignments.push_back(a.cluster_id);
            if (labeled)
                result.clustered_labels.push_back(stream.held_out_labels()[index]);
        }
        ++index;
    }
    result.final_centers = clusterer->centers();

    RunSummary& s = result.summary;
    s.n_clustered = result.clustered_points.size();
    s.n_classified = index - s.n_clustered;
    s.pct_classified = index ? static_cast<double>(s.n_classified) / static_cast<double>(index) : 0.0;
    s.classify_seconds = classify_s;
    s.cluster_seconds = cluster_s;
    s.config = config_echo(cfg);
    if (labeled)
        s.bac = detail::classified_bac(model, result.decisions, stream.held_out_labels(),
                                       stream.label_names());
    detail::fill_cluster_metrics(s, result);
    return result;
}

// Threshold grid used when the caller does not supply one.
inline std::vector<double> default_threshold_grid() {
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9,
            0.99, 0.999, 0.9999, 0.99999, 0.999999, 0.9999999, 0.99999999};
}

struct SweepRow {
    double threshold = 0.0;
    double pct_classified = 0.0;
    std::optional<double> bac;
};

// One probability pass serves every threshold; probabilities do not depend on
// t, only the gate verdict does.
inline std::vector<SweepRow> sweep_threshold(const PipelineConfig& cfg, const TrainedModel& model,
                                             const StreamData& stream,
                                             const std::vector<double>& grid) {
    if (grid.empty()) throw data_error("sweep: empty threshold grid");
    if (!stream.has_labels())
        throw data_error("sweep: stream labels required to score balanced accuracy");

    std::vector<std::vector<double>> probs;
    probs.reserve(stream.size());
    for (const auto& x : stream.samples) probs.push_back(model.predict_raw(x));

    std::vector<SweepRow> rows;
    for (double t : grid) {
        GateConfig gate_cfg{t, cfg.method};
        std::vector<DecisionRecord> decisions;
        std::size_t classified = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const GateDecision g = gate(probs[i], gate_cfg);
            if (g.high_confidence) {
                ++classified;
                decisions.push_back(DecisionRecord::classified(
                    i, static_cast<int>(g.argmax_index), g.max_value, probs[i]));
            }
        }
        SweepRow row;
        row.threshold = t;
        row.pct_classified =
            stream.size() ? static_cast<double>(classified) / static_cast<double>(stream.size())
                          : 0.0;
        row.bac = detail::classified_bac(model, decisions, stream.labels, stream.label_names);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    out << "t,pct_classified,bac\n";
    for (const auto& r : rows) {
        out << format_double(r.threshold) << ',' << format_double(r.pct_classified) << ',';
        if (r.bac) out << format_double(*r.bac);
        out << '\n';
    }
}

struct ElbowRow {
    std::size_t clusters = 0;
    double wcss_value = 0.0;
};

// Final WCSS of one online run per cluster count, identical input order each
// time. For BSAS the count acts as the cluster cap q.
inline std::vector<ElbowRow> elbow(const std::vector<FeatureVector>& vectors, std::size_t max_k,
                                   const ClustererConfig& base) {
    if (vectors.empty()) throw data_error("elbow: empty input");
    if (max_k < 2) throw data_error("elbow: need max cluster count >= 2");
    std::vector<ElbowRow> rows;
    for (std::size_t k = 1; k <= max_k; ++k) {
        ClustererConfig cfg = base;
        cfg.clusters = k;
        cfg.q = k;
        auto clusterer = make_clusterer(cfg, vectors.front().size());
        for (const auto& x : vectors) clusterer->consume(x);
        std::vector<std::size_t> assignments;
        assignments.reserve(vectors.size());
        for (const auto& a : clusterer->assignments()) assignments.push_back(a.cluster_id);
        rows.push_back({k, wcss(assignments, vectors, clusterer->centers())});
    }
    return rows;
}

inline void write_elbow_csv(const std::string& path, const std::vector<ElbowRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    out << "k,wcss\n";
    for (const auto& r : rows) out << r.clusters << ',' << format_double(r.wcss_value) << '\n';
}

// Re-score an existing decisions file against held-out stream labels. WCSS is
// computed against per-cluster means of the clustered points, which equals
// the final centroid for the running-mean clusterers.
inline RunSummary evaluate_decisions(const PipelineConfig& cfg, const TrainedModel& model,
                                     const std::vector<DecisionRecord>& decisions,
                                     const StreamData& stream) {
    if (decisions.size() != stream.size())
        throw data_error("eval: decision count " + std::to_string(decisions.size()) +
                         " does not match stream size " + std::to_string(stream.size()));
    StreamResult result;
    result.decisions = decisions;
    for (const auto& r : decisions) {
        if (r.sample_index >= stream.size())
            throw data_error("eval: sample_index out of range");
        if (r.kind != DecisionKind::clustered) continue;
        result.clustered_points.push_back(model.preprocess.transform(stream.samples[r.sample_index]));
        result.clustered_assignments.push_back(*r.cluster_id);
        if (stream.has_labels())
            result.clustered_labels.push_back(stream.labels[r.sample_index]);
    }
    if (!result.clustered_points.empty()) {
        const std::size_t n_clusters =
            1 + *std::max_element(result.clustered_assignments.begin(),
                                  result.clustered_assignments.end());
        std::vector<FeatureVector> means(n_clusters,
                                         FeatureVector(model.preprocess.n_components, 0.0));
        std::vector<std::size_t> counts(n_clusters, 0);
        for (std::size_t i = 0; i < result.clustered_points.size(); ++i) {
            const std::size_t c = result.clustered_assignments[i];
            ++counts[c];
            for (std::size_t d = 0; d < means[c].size(); ++d)
                means[c][d] += result.clustered_points[i][d];
        }
        for (std::size_t c = 0; c < n_clusters; ++c)
            if (counts[c])
                for (double& v : means[c]) v /= static_cast<double>(counts[c]);
        result.final_centers = std::move(means);
    }

    RunSummary s;
    s.n_clustered = result.clustered_points.size();
    s.n_classified = decisions.size() - s.n_clustered;
    s.pct_classified = decisions.empty() ? 0.0
                                         : static_cast<double>(s.n_classified) /
                                               static_cast<double>(decisions.size());
    s.config = config_echo(cfg);
    if (stream.has_labels())
        s.bac = detail::classified_bac(model, decisions, stream.labels, stream.label_names);
    detail::fill_cluster_metrics(s, result);
    return s;
}

struct BenchStats {
    std::size_t samples = 0;
    std::vector<double> runs_seconds;
    double mean_seconds = 0.0;
    double stdev_seconds = 0.0;
    double samples_per_sec_mean = 0.0;
    double samples_per_sec_stdev = 0.0;
};

struct BenchReport {
    std::size_t stream_size = 0;
    std::size_t n_low_confidence = 0;
    std::size_t repetitions = 0;
    BenchStats classify;
    std::vector<std::pair<std::string, BenchStats>> clusterers;  // okm, bsas, som
    BenchStats end_to_end;
};

namespace detail {

inline void finish_stats(BenchStats& s) {
    const double n = static_cast<double>(s.runs_seconds.size());
    double mean = 0.0;
    for (double v : s.runs_seconds) mean += v;
    mean /= n;
    double var = 0.0;
    std::vector<double> rates;
    for (double v : s.runs_seconds) {
        var += (v - mean) * (v - mean);
        rates.push_back(static_cast<double>(s.samples) / v);
    }
    var = n > 1 ? var / (n - 1) : 0.0;
    s.mean_seconds = mean;
    s.stdev_seconds = std::sqrt(var);
    double rmean = 0.0;
    for (double r : rates) rmean += r;
    rmean /= n;
    double rvar = 0.0;
    for (double r : rates) rvar += (r - rmean) * (r - rmean);
    s.samples_per_sec_mean = rmean;
    s.samples_per_sec_stdev = std::sqrt(n > 1 ? rvar / (n - 1) : 0.0);
}

}  // namespace detail

// Wall-clock throughput of the classify path, of each clustering algorithm
// over the low-confidence subset, and of the full end-to-end loop.
inline BenchReport bench(const PipelineConfig& cfg, const TrainedModel& model,
                         const StreamData& stream, std::size_t repetitions = 10) {
    if (repetitions < 1) throw data_error("bench: repetitions must be >= 1");
    if (stream.size() == 0) throw data_error("bench: empty stream");
    const GateConfig gate_cfg{cfg.threshold, cfg.method};

    // low-confidence subset, computed once up front
    std::vector<FeatureVector> low;
    for (const auto& x : stream.samples) {
        FeatureVector z = model.preprocess.transform(x);
        if (!gate(model.predict_transformed(z), gate_cfg).high_confidence)
            low.push_back(std::move(z));
    }

    BenchReport report;
    report.stream_size = stream.size();
    report.n_low_confidence = low.size();
    report.repetitions = repetitions;
    report.classify.samples = stream.size();
    report.end_to_end.samples = stream.size();

    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        std::size_t n_high = 0;
        for (const auto& x : stream.samples) {
            const FeatureVector z = model.preprocess.transform(x);
            if (gate(model.predict_transformed(z), gate_cfg).high_confidence) ++n_high;
        }
        report.classify.runs_seconds.push_back(detail::seconds_since(t0));
        if (n_high + low.size() != stream.size())
            throw numeric_error("bench: inconsistent gate verdicts between passes");
    }
    detail::finish_stats(report.classify);

    for (const std::string algorithm : {"okm", "bsas", "som"}) {
        BenchStats stats;
        stats.samples = low.size();
        for (std::size_t rep = 0; rep < repetitions && !low.empty(); ++rep) {
            ClustererConfig ccfg = cfg.clusterer;
            ccfg.algorithm = algorithm;
            auto clusterer = make_clusterer(ccfg, model.preprocess.n_components);
            auto t0 = std::chrono::steady_clock::now();
            for (const auto& z : low) clusterer->consume(z);
            stats.runs_seconds.push_back(detail::seconds_since(t0));
        }
        if (!stats.runs_seconds.empty()) detail::finish_stats(stats);
        report.clusterers.emplace_back(algorithm, std::move(stats));
    }

    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        auto clusterer = make_clusterer(cfg.clusterer, model.preprocess.n_components);
        auto t0 = std::chrono::steady_clock::now();
        for (const auto& x : stream.samples) {
            FeatureVector z = model.preprocess.transform(x);
            const GateDecision g = gate(model.predict_transformed(z), gate_cfg);
            if (!g.high_confidence) clusterer->consume(z);
        }
        report.end_to_end.runs_seconds.push_back(detail::seconds_since(t0));
    }
    detail::finish_stats(report.end_to_end);
    return report;
}

inline nlohmann::ordered_json bench_stats_to_json(const BenchStats& s) {
    nlohmann::ordered_json j;
    j["samples"] = s.samples;
    j["runs_seconds"] = s.runs_seconds;
    j["mean_seconds"] = s.mean_seconds;
    j["stdev_seconds"] = s.stdev_seconds;
    j["samples_per_sec_mean"] = s.samples_per_sec_mean;
    j["samples_per_sec_stdev"] = s.samples_per_sec_stdev;
    return j;
}

inline nlohmann::ordered_json bench_to_json(const BenchReport& r) {
    nlohmann::ordered_json j;
    j["stream_size"] = r.stream_size;
    j["n_low_confidence"] = r.n_low_confidence;
    j["repetitions"] = r.repetitions;
    j["classify"] = bench_stats_to_json(r.classify);
    nlohmann::ordered_json cl;
    for (const auto& [name, stats] : r.clusterers) cl[name] = bench_stats_to_json(stats);
    j["clusterers"] = std::move(cl);
    j["end_to_end"] = bench_stats_to_json(r.end_to_end);
    return j;
}

}  // namespace malstream
