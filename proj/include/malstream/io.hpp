#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "malstream/core.hpp"

namespace malstream {

// Shortest round-trip decimal representation. Byte-stable and lossless, so
// written CSVs reload bitwise identical.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.emplace_back(trim(std::string_view(line).substr(start)));
            break;
        }
        cells.emplace_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // raw cells, header excluded
};

// Rows are numbered as file lines, 1-based; the header is row 1.
inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path);

    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 &&
            static_cast<unsigned char>(line[0]) == 0xEF &&
            static_cast<unsigned char>(line[1]) == 0xBB &&
            static_cast<unsigned char>(line[2]) == 0xBF)
            line.erase(0, 3);  // UTF-8 BOM
        if (line_no == 1) {
            table.header = split_csv_line(line);
            continue;
        }
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        auto cells = split_csv_line(line);
        if (cells.size() != table.header.size())
            throw data_error(path + ": row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(table.header.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw data_error(path + ": empty file");
    if (table.rows.empty()) throw data_error(path + ": no data rows");
    return table;
}

inline double parse_cell(const std::string& cell, const std::string& path, std::size_t row_no,
                         const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw data_error(path + ": row " + std::to_string(row_no) + ", column " + column +
                         ": non-numeric cell '" + cell + "'");
    if (!std::isfinite(value))
        throw data_error(path + ": row " + std::to_string(row_no) + ", column " + column +
                         ": non-finite value '" + cell + "'");
    return value;
}

struct ParsedCsv {
    std::vector<FeatureVector> samples;
    std::vector<std::string> feature_names;
    std::vector<int> labels;
    std::vector<std::string> label_names;
};

inline ParsedCsv parse_csv(const std::string& path, const std::optional<std::string>& label_column) {
    const CsvTable table = read_csv_table(path);

    std::ptrdiff_t label_idx = -1;
    if (label_column) {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (table.header[c] == *label_column) {
                label_idx = static_cast<std::ptrdiff_t>(c);
                break;
            }
        if (label_idx < 0)
            throw data_error(path + ": unknown label column '" + *label_column + "'");
    }

    ParsedCsv out;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (static_cast<std::ptrdiff_t>(c) != label_idx)
            out.feature_names.push_back(table.header[c]);
    if (out.feature_names.empty()) throw data_error(path + ": no feature columns");

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cells = table.rows[r];
        const std::size_t row_no = r + 2;  // header is row 1
        FeatureVector x;
        x.reserve(out.feature_names.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<std::ptrdiff_t>(c) == label_idx) continue;
            x.push_back(parse_cell(cells[c], path, row_no, table.header[c]));
        }
        out.samples.push_back(std::move(x));
        if (label_idx >= 0) {
            const std::string& name = cells[static_cast<std::size_t>(label_idx)];
            int id = -1;
            for (std::size_t i = 0; i < out.label_names.size(); ++i)
                if (out.label_names[i] == name) {
                    id = static_cast<int>(i);
                    break;
                }
            if (id < 0) {
                id = static_cast<int>(out.label_names.size());
                out.label_names.push_back(name);
            }
            out.labels.push_back(id);
        }
    }
    return out;
}

}  // namespace detail

// Load a training CSV. The label column is mapped to dense class indices in
// first-appearance order.
inline LabeledDataset load_labeled_csv(const std::string& path, const std::string& label_column) {
    auto parsed = detail::parse_csv(path, label_column);
    LabeledDataset ds;
    ds.samples = std::move(parsed.samples);
    ds.labels = std::move(parsed.labels);
    ds.class_names = std::move(parsed.label_names);
    ds.feature_names = std::move(parsed.feature_names);
    ds.validate();
    return ds;
}

// Load a stream CSV. When label_column is given those labels are held out for
// evaluation; otherwise every column is a feature.
inline StreamData load_stream_csv(const std::string& path,
                                  const std::optional<std::string>& label_column = {}) {
    auto parsed = detail::parse_csv(path, label_column);
    StreamData s;
    s.samples = std::move(parsed.samples);
    s.feature_names = std::move(parsed.feature_names);
    s.labels = std::move(parsed.labels);
    s.label_names = std::move(parsed.label_names);
    return s;
}

inline void write_csv(const std::string& path, const std::vector<FeatureVector>& samples,
                      const std::vector<std::string>& feature_names,
                      const std::vector<int>* labels = nullptr,
                      const std::vector<std::string>* label_names = nullptr,
                      const std::string& label_column = "family") {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    for (std::size_t c = 0; c < feature_names.size(); ++c) {
        if (c) out << ',';
        out << feature_names[c];
    }
    if (labels) out << ',' << label_column;
    out << '\n';
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const auto& x = samples[r];
        for (std::size_t c = 0; c < x.size(); ++c) {
            if (c) out << ',';
            out << format_double(x[c]);
        }
        if (labels) out << ',' << (*label_names)[static_cast<std::size_t>((*labels)[r])];
        out << '\n';
    }
    if (!out) throw data_error("write failed: " + path);
}

inline void write_labeled_csv(const std::string& path, const LabeledDataset& ds,
                              const std::string& label_column = "family") {
    write_csv(path, ds.samples, ds.feature_names, &ds.labels, &ds.class_names, label_column);
}

inline nlohmann::ordered_json decision_to_json(const DecisionRecord& r) {
    nlohmann::ordered_json j;
    j["sample_index"] = r.sample_index;
    j["decision_kind"] = r.kind == DecisionKind::classified ? "classified" : "clustered";
    if (r.family_index) j["family_index"] = *r.family_index;
    if (r.cluster_id) j["cluster_id"] = *r.cluster_id;
    j["max_probability"] = r.max_probability;
    j["probability_vector"] = r.probability_vector;
    return j;
}

// One JSON object per line, in input order. Byte-stable for identical input.
inline void write_decisions(const std::vector<DecisionRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write file: " + path);
    for (const auto& r : records) out << decision_to_json(r).dump() << '\n';
    if (!out) throw data_error("write failed: " + path);
}

inline std::vector<DecisionRecord> read_decisions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open file: " + path);
    std::vector<DecisionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        DecisionRecord r;
        try {
            r.sample_index = j.at("sample_index").get<std::size_t>();
            const std::string kind = j.at("decision_kind").get<std::string>();
            if (kind == "classified") {
                r.kind = DecisionKind::classified;
                r.family_index = j.at("family_index").get<int>();
            } else if (kind == "clustered") {
                r.kind = DecisionKind::clustered;
                r.cluster_id = j.at("cluster_id").get<std::size_t>();
            } else {
                throw data_error("unknown decision_kind '" + kind + "'");
            }
            r.max_probability = j.at("max_probability").get<double>();
            r.probability_vector = j.at("probability_vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw data_error(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace malstream
