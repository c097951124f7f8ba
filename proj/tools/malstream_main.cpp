// malstream: stream triage for vectorized malware samples. Confident samples
// go to a trained family classifier, the rest feed an online clusterer that
// grows candidate new families.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "malstream/io.hpp"
#include "malstream/model_io.hpp"
#include "malstream/pipeline.hpp"
#include "malstream/synth.hpp"

namespace {

using namespace malstream;

struct CommonFlags {
    std::string config_path;
    std::string model_path;
    std::string data_path;
    std::string out_path;
    std::string label_column;
    std::optional<double> threshold;
    std::optional<std::string> method;
    std::optional<std::string> clusterer;
    std::optional<std::size_t> clusters;
    std::optional<double> theta;
    std::optional<std::size_t> max_clusters;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> components;
};

void add_override_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--threshold", f.threshold, "confidence gate threshold t in [0,1]");
    cmd->add_option("--method", f.method, "single | multi")
        ->check(CLI::IsMember({"single", "multi"}));
    cmd->add_option("--clusterer", f.clusterer, "okm | bsas | som")
        ->check(CLI::IsMember({"okm", "bsas", "som"}));
    cmd->add_option("--clusters", f.clusters, "cluster / neuron count");
    cmd->add_option("--theta", f.theta, "BSAS dissimilarity threshold");
    cmd->add_option("--max-clusters", f.max_clusters, "BSAS cluster cap q");
    cmd->add_option("--seed", f.seed, "RNG seed");
    cmd->add_option("--components", f.components, "PCA component count");
}

PipelineConfig effective_config(const CommonFlags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw data_error("cannot open config: " + f.config_path);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw data_error(f.config_path + ": " + e.what());
        }
    }
    PipelineConfig cfg = config_from_json(j);
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.train.seed = *f.seed;
        cfg.clusterer.seed = *f.seed;
    }
    if (f.threshold) cfg.threshold = *f.threshold;
    if (f.method) cfg.method = gate_method_from_string(*f.method);
    if (f.clusterer) cfg.clusterer.algorithm = *f.clusterer;
    if (f.clusters) cfg.clusterer.clusters = *f.clusters;
    if (f.theta) cfg.clusterer.theta = *f.theta;
    if (f.max_clusters) cfg.clusterer.q = *f.max_clusters;
    if (f.components) {
        cfg.preprocess.n_components = *f.components;
        cfg.preprocess.grid.clear();
    }
    cfg.validate();
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    out << text;
    if (!out) throw data_error("write failed: " + path);
}

int cmd_train(const CommonFlags& f) {
    const PipelineConfig cfg = effective_config(f);
    const LabeledDataset data =
        load_labeled_csv(f.data_path, f.label_column.empty() ? "family" : f.label_column);
    const TrainOutcome outcome = run_train(cfg, data);
    save_model(outcome.model, f.out_path);

    for (const auto& [m, bac] : outcome.component_report)
        std::cerr << "components " << m << ": holdout BAC " << bac << "\n";
    for (const auto& entry : outcome.grid_report) {
        std::cerr << "grid hidden=(";
        for (std::size_t i = 0; i < entry.point.hidden.size(); ++i)
            std::cerr << (i ? "," : "") << entry.point.hidden[i];
        std::cerr << ") act=" << to_string(entry.point.activation)
                  << " alpha=" << entry.point.alpha << ": holdout BAC " << entry.holdout_bac
                  << "\n";
    }
    std::cout << "training BAC: " << outcome.training_bac << "\n";
    std::cerr << "trained " << outcome.model.kind << " model on " << data.size() << " samples, "
              << data.num_classes() << " families, " << outcome.model.preprocess.n_components
              << " components, in " << outcome.seconds << " s -> " << f.out_path << "\n";
    return 0;
}

int cmd_stream(const CommonFlags& f, const std::string& summary_path) {
    const PipelineConfig cfg = effective_config(f);
    const TrainedModel model = load_model(f.model_path);
    StreamData data = load_stream_csv(
        f.data_path, f.label_column.empty() ? std::nullopt : std::optional(f.label_column));
    StreamSource stream(std::move(data));
    const StreamResult result = run_stream(cfg, model, stream);

    write_decisions(result.decisions, f.out_path);
    write_text(summary_path, summary_to_json(result.summary).dump(2) + "\n");

    const RunSummary& s = result.summary;
    std::cerr << "classified " << s.n_classified << " / " << (s.n_classified + s.n_clustered)
              << " (" << 100.0 * s.pct_classified << "%), clustered " << s.n_clustered << "\n";
    if (s.bac) std::cerr << "classified-subset BAC: " << *s.bac << "\n";
    if (s.purity_score) std::cerr << "clustered-subset purity: " << *s.purity_score << "\n";
    if (s.silhouette_score) std::cerr << "clustered-subset silhouette: " << *s.silhouette_score << "\n";
    if (s.wcss_score) std::cerr << "clustered-subset WCSS: " << *s.wcss_score << "\n";
    std::cerr << "timings: classify " << s.classify_seconds << " s, cluster "
              << s.cluster_seconds << " s\n";
    std::cerr << "decisions -> " << f.out_path << ", summary -> " << summary_path << "\n";
    return 0;
}

int cmd_sweep(const CommonFlags& f, std::vector<double> grid) {
    const PipelineConfig cfg = effective_config(f);
    const TrainedModel model = load_model(f.model_path);
    if (f.label_column.empty())
        throw data_error("sweep-threshold: --label-column is required to score BAC");
    const StreamData data = load_stream_csv(f.data_path, f.label_column);
    if (grid.empty()) grid = default_threshold_grid();
    const auto rows = sweep_threshold(cfg, model, data, grid);
    write_sweep_csv(f.out_path, rows);
    std::cerr << rows.size() << " thresholds -> " << f.out_path << "\n";
    return 0;
}

int cmd_elbow(const CommonFlags& f, std::size_t max_k) {
    const PipelineConfig cfg = effective_config(f);
    const StreamData data = load_stream_csv(
        f.data_path, f.label_column.empty() ? std::nullopt : std::optional(f.label_column));
    const std::size_t n = max_k ? max_k : cfg.clusterer.clusters;
    const auto rows = elbow(data.samples, n, cfg.clusterer);
    write_elbow_csv(f.out_path, rows);
    std::cerr << "k = 1.." << n << " -> " << f.out_path << "\n";
    return 0;
}

int cmd_synth(const SynthConfig& synth_cfg, const std::string& train_path,
              const std::string& stream_path, const std::string& label_column) {
    const SynthResult result = make_synthetic(synth_cfg);
    write_labeled_csv(train_path, result.train, label_column);
    write_csv(stream_path, result.stream.samples, result.stream.feature_names,
              &result.stream.labels, &result.stream.label_names, label_column);
    std::cerr << "train: " << result.train.size() << " samples, "
              << result.train.num_classes() << " families -> " << train_path << "\n";
    std::cerr << "stream: " << result.stream.size() << " samples, "
              << result.stream.label_names.size() << " families -> " << stream_path << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& decisions_path) {
    const PipelineConfig cfg = effective_config(f);
    const TrainedModel model = load_model(f.model_path);
    const StreamData data = load_stream_csv(
        f.data_path, f.label_column.empty() ? std::nullopt : std::optional(f.label_column));
    const auto decisions = read_decisions(decisions_path);
    const RunSummary s = evaluate_decisions(cfg, model, decisions, data);
    const std::string text = summary_to_json(s).dump(2) + "\n";
    if (f.out_path.empty())
        std::cout << text;
    else
        write_text(f.out_path, text);
    return 0;
}

int cmd_bench(const CommonFlags& f, std::size_t repetitions) {
    const PipelineConfig cfg = effective_config(f);
    const TrainedModel model = load_model(f.model_path);
    const StreamData data = load_stream_csv(
        f.data_path, f.label_column.empty() ? std::nullopt : std::optional(f.label_column));
    const BenchReport report = bench(cfg, model, data, repetitions);
    const std::string text = bench_to_json(report).dump(2) + "\n";
    if (f.out_path.empty())
        std::cout << text;
    else
        write_text(f.out_path, text);
    std::cerr << "end-to-end: " << report.end_to_end.samples_per_sec_mean << " +/- "
              << report.end_to_end.samples_per_sec_stdev << " samples/sec over "
              << report.repetitions << " runs\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stream triage: classify confident samples into known families, "
                 "cluster the rest online"};
    app.require_subcommand(1);

    CommonFlags train_f, stream_f, sweep_f, elbow_f, eval_f, bench_f;
    std::string stream_summary = "summary.json";
    std::vector<double> sweep_grid;
    std::size_t elbow_max_k = 0;
    std::string eval_decisions;
    std::size_t bench_reps = 10;

    SynthConfig synth_cfg;
    std::string synth_train = "train.csv", synth_stream = "stream.csv", synth_label = "family";

    auto* train = app.add_subcommand("train", "fit scaler, PCA and classifier from a labeled CSV");
    train->add_option("--data", train_f.data_path, "labeled training CSV")->required();
    train->add_option("--out", train_f.out_path, "model JSON output")->required();
    train->add_option("--label-column", train_f.label_column, "label column name (default family)");
    add_override_flags(train, train_f);

    auto* stream = app.add_subcommand("stream", "run the two-phase pipeline over a stream CSV");
    stream->add_option("--model", stream_f.model_path, "model JSON")->required();
    stream->add_option("--data", stream_f.data_path, "stream CSV")->required();
    stream->add_option("--out", stream_f.out_path, "decisions JSONL output")->required();
    stream->add_option("--summary-out", stream_summary, "summary JSON output");
    stream->add_option("--label-column", stream_f.label_column,
                       "held-out label column, used only for evaluation");
    add_override_flags(stream, stream_f);

    auto* sweep = app.add_subcommand("sweep-threshold",
                                     "pct classified and BAC per gate threshold");
    sweep->add_option("--model", sweep_f.model_path, "model JSON")->required();
    sweep->add_option("--data", sweep_f.data_path, "stream CSV")->required();
    sweep->add_option("--out", sweep_f.out_path, "CSV output (t,pct_classified,bac)")->required();
    sweep->add_option("--label-column", sweep_f.label_column, "held-out label column")->required();
    sweep->add_option("--grid", sweep_grid, "threshold values (default: 0.1..0.9, 0.99..0.99999999)");
    add_override_flags(sweep, sweep_f);

    auto* elbow_cmd = app.add_subcommand("elbow", "final WCSS per cluster count, k = 1..N");
    elbow_cmd->add_option("--data", elbow_f.data_path, "vector CSV to cluster")->required();
    elbow_cmd->add_option("--out", elbow_f.out_path, "CSV output (k,wcss)")->required();
    elbow_cmd->add_option("--max-k", elbow_max_k, "largest cluster count (default --clusters)");
    elbow_cmd->add_option("--label-column", elbow_f.label_column,
                          "label column to strip before clustering");
    add_override_flags(elbow_cmd, elbow_f);

    auto* synth = app.add_subcommand("synth", "generate seeded Gaussian-family train/stream CSVs");
    synth->add_option("--families", synth_cfg.families, "total family count");
    synth->add_option("--train-families", synth_cfg.trained_families,
                      "families present in the training CSV");
    synth->add_option("--dim", synth_cfg.dim, "feature dimension");
    synth->add_option("--samples-per-family", synth_cfg.samples_per_family, "rows per family");
    synth->add_option("--separation", synth_cfg.separation, "minimum distance between family means");
    synth->add_option("--seed", synth_cfg.seed, "RNG seed");
    synth->add_option("--out-train", synth_train, "training CSV path");
    synth->add_option("--out-stream", synth_stream, "stream CSV path");
    synth->add_option("--label-column", synth_label, "label column name");

    auto* eval = app.add_subcommand("eval", "re-score a decisions file against held-out labels");
    eval->add_option("--decisions", eval_decisions, "decisions JSONL")->required();
    eval->add_option("--model", eval_f.model_path, "model JSON")->required();
    eval->add_option("--data", eval_f.data_path, "stream CSV the decisions were made on")->required();
    eval->add_option("--label-column", eval_f.label_column, "held-out label column");
    eval->add_option("--out", eval_f.out_path, "summary JSON output (default stdout)");
    add_override_flags(eval, eval_f);

    auto* bench_cmd = app.add_subcommand("bench", "throughput of classification and clustering");
    bench_cmd->add_option("--model", bench_f.model_path, "model JSON")->required();
    bench_cmd->add_option("--data", bench_f.data_path, "stream CSV")->required();
    bench_cmd->add_option("--repetitions", bench_reps, "timing repetitions (default 10)");
    bench_cmd->add_option("--label-column", bench_f.label_column, "label column to strip");
    bench_cmd->add_option("--out", bench_f.out_path, "report JSON output (default stdout)");
    add_override_flags(bench_cmd, bench_f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(train_f);
        if (stream->parsed()) return cmd_stream(stream_f, stream_summary);
        if (sweep->parsed()) return cmd_sweep(sweep_f, sweep_grid);
        if (elbow_cmd->parsed()) return cmd_elbow(elbow_f, elbow_max_k);
        if (synth->parsed()) return cmd_synth(synth_cfg, synth_train, synth_stream, synth_label);
        if (eval->parsed()) return cmd_eval(eval_f, eval_decisions);
        if (bench_cmd->parsed()) return cmd_bench(bench_f, bench_reps);
    } catch (const malstream::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const malstream::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
