#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "malstream/core.hpp"

namespace malstream {

enum class GateMethod { single, multi };

inline const char* to_string(GateMethod m) { return m == GateMethod::single ? "single" : "multi"; }

inline GateMethod gate_method_from_string(const std::string& s) {
    if (s == "single") return GateMethod::single;
    if (s == "multi") return GateMethod::multi;
    throw data_error("unknown method '" + s + "', expected single or multi");
}

struct GateConfig {
    double threshold = 0.6;
    GateMethod method = GateMethod::single;
};

// high_confidence iff max probability >= threshold. argmax ties break toward
// the lowest class index.
struct GateDecision {
    bool high_confidence = false;
    std::size_t argmax_index = 0;
    double max_value = 0.0;
};

inline GateDecision gate(const std::vector<double>& probabilities, const GateConfig& config) {
    if (probabilities.size() < 2)
        throw data_error("gate: need at least 2 class probabilities");
    if (config.threshold < 0.0 || config.threshold > 1.0)
        throw data_error("gate: threshold must be in [0, 1]");
    std::size_t arg = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw data_error("gate: probability entry " + std::to_string(i) + " outside [0, 1]");
        if (p > probabilities[arg]) arg = i;
    }
    GateDecision d;
    d.argmax_index = arg;
    d.max_value = probabilities[arg];
    d.high_confidence = d.max_value >= config.threshold;
    return d;
}

}  // namespace malstream
