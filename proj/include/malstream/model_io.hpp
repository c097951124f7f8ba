#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "malstream/classifier.hpp"
#include "malstream/core.hpp"
#include "malstream/preprocess.hpp"

namespace malstream {

// A trained pipeline head: frozen preprocessing plus either one multiclass
// net ("single") or k one-vs-rest binary nets ("ovr").
struct TrainedModel {
    PreprocessModel preprocess;
    std::string kind = "single";
    std::vector<std::string> class_names;
    std::vector<MlpModel> models;  // size 1 for single, k for ovr

    std::size_t num_classes() const { return class_names.size(); }

    // Raw stream vector in, class-probability vector out.
    std::vector<double> predict_raw(const FeatureVector& raw) const {
        return predict_transformed(preprocess.transform(raw));
    }

    std::vector<double> predict_transformed(const FeatureVector& x) const {
        if (kind == "single") return predict_proba(models.front(), x);
        std::vector<double> p(models.size());
        for (std::size_t i = 0; i < models.size(); ++i) p[i] = predict_proba(models[i], x)[1];
        return p;
    }

    void validate() const {
        preprocess.validate();
        if (kind != "single" && kind != "ovr")
            throw data_error("model: kind must be single or ovr");
        if (class_names.size() < 2) throw data_error("model: need at least 2 classes");
        if (kind == "single") {
            if (models.size() != 1) throw data_error("model: single kind holds exactly 1 net");
            if (models.front().output_dim() != class_names.size())
                throw data_error("model: output width must equal class count");
        } else {
            if (models.size() != class_names.size())
                throw data_error("model: ovr kind holds one net per class");
            for (const auto& m : models)
                if (m.output_dim() != 2) throw data_error("model: ovr nets are binary");
        }
        for (const auto& m : models) {
            m.validate();
            if (m.input_dim() != preprocess.n_components)
                throw data_error("model: net input must match component count");
        }
    }
};

namespace detail {

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < m.rows; ++r)
        rows.push_back(std::vector<double>(m.row(r), m.row(r) + m.cols));
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m;
    m.rows = j.size();
    m.cols = m.rows ? j.at(0).size() : 0;
    m.data.reserve(m.rows * m.cols);
    for (const auto& row : j) {
        if (row.size() != m.cols) throw data_error("model file: ragged matrix");
        for (const auto& v : row) m.data.push_back(v.get<double>());
    }
    return m;
}

inline nlohmann::ordered_json mlp_to_json(const MlpModel& m) {
    nlohmann::ordered_json j;
    j["layer_sizes"] = m.layer_sizes;
    j["hidden_activation"] = to_string(m.hidden_activation);
    j["alpha"] = m.alpha;
    j["rng_seed"] = m.rng_seed;
    nlohmann::ordered_json weights = nlohmann::ordered_json::array();
    for (const auto& w : m.weights) weights.push_back(matrix_to_json(w));
    j["weights"] = std::move(weights);
    j["biases"] = m.biases;
    return j;
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    m.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    m.alpha = j.at("alpha").get<double>();
    m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& w : j.at("weights")) m.weights.push_back(matrix_from_json(w));
    m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    return m;
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const TrainedModel& model) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    nlohmann::ordered_json pre;
    pre["means"] = model.preprocess.means;
    pre["scales"] = model.preprocess.scales;
    pre["components"] = detail::matrix_to_json(model.preprocess.components);
    pre["n_components"] = model.preprocess.n_components;
    j["preprocess"] = std::move(pre);
    j["kind"] = model.kind;
    j["class_names"] = model.class_names;
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& m : model.models) models.push_back(detail::mlp_to_json(m));
    j["models"] = std::move(models);
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw data_error("model file: unsupported schema_version");
        TrainedModel model;
        const auto& pre = j.at("preprocess");
        model.preprocess.means = pre.at("means").get<std::vector<double>>();
        model.preprocess.scales = pre.at("scales").get<std::vector<double>>();
        model.preprocess.components = detail::matrix_from_json(pre.at("components"));
        model.preprocess.n_components = pre.at("n_components").get<std::size_t>();
        model.kind = j.at("kind").get<std::string>();
        model.class_names = j.at("class_names").get<std::vector<std::string>>();
        for (const auto& m : j.at("models")) model.models.push_back(detail::mlp_from_json(m));
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("model file: ") + e.what());
    }
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw data_error("write failed: " + path);
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace malstream
