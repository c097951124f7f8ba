#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "malstream/core.hpp"
#include "malstream/rng.hpp"

namespace malstream {

// Seeded Gaussian-blob generator: one isotropic unit-variance family per
// mean, means rejection-sampled at pairwise distance >= separation. The train
// split holds only the first trained_families families; the stream holds all
// of them, so the remainder appear as novel families.
struct SynthConfig {
    std::size_t families = 7;
    std::size_t trained_families = 4;
    std::size_t dim = 16;
    std::size_t samples_per_family = 100;
    double separation = 10.0;
    std::uint64_t seed = 42;

    void validate() const {
        if (families < 1) throw data_error("synth: families must be >= 1");
        if (trained_families < 1 || trained_families > families)
            throw data_error("synth: trained_families must be in [1, families]");
        if (dim < 2) throw data_error("synth: dim must be >= 2");
        if (samples_per_family < 1) throw data_error("synth: samples_per_family must be >= 1");
        if (separation < 0.0) throw data_error("synth: separation must be >= 0");
    }
};

struct SynthResult {
    LabeledDataset train;
    StreamData stream;
};

inline SynthResult make_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const double box = std::max(1.0, cfg.separation * static_cast<double>(cfg.families));
    std::vector<FeatureVector> means;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * cfg.families;
    while (means.size() < cfg.families) {
        if (++attempts > max_attempts)
            throw data_error("synth: could not place family means at separation " +
                             std::to_string(cfg.separation) + " after bounded retries");
        FeatureVector m(cfg.dim);
        for (double& v : m) v = rng.uniform(-box, box);
        bool ok = true;
        for (const auto& other : means) {
            double s = 0.0;
            for (std::size_t d = 0; d < cfg.dim; ++d) {
                const double diff = m[d] - other[d];
                s += diff * diff;
            }
            if (s < cfg.separation * cfg.separation) {
                ok = false;
                break;
            }
        }
        if (ok) means.push_back(std::move(m));
    }

    std::vector<std::string> names;
    for (std::size_t f = 0; f < cfg.families; ++f) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "family_%02zu", f);
        names.emplace_back(buf);
    }
    std::vector<std::string> feature_names;
    for (std::size_t d = 0; d < cfg.dim; ++d) feature_names.push_back("f" + std::to_string(d + 1));

    auto draw_block = [&](std::size_t n_families) {
        std::vector<FeatureVector> samples;
        std::vector<int> labels;
        for (std::size_t f = 0; f < n_families; ++f)
            for (std::size_t i = 0; i < cfg.samples_per_family; ++i) {
                FeatureVector x(cfg.dim);
                for (std::size_t d = 0; d < cfg.dim; ++d) x[d] = means[f][d] + rng.normal();
                samples.push_back(std::move(x));
                labels.push_back(static_cast<int>(f));
            }
        // deterministic interleave so families arrive mixed, like a stream
        std::vector<std::size_t> order(samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        std::vector<FeatureVector> s2;
        std::vector<int> l2;
        for (std::size_t i : order) {
            s2.push_back(std::move(samples[i]));
            l2.push_back(labels[i]);
        }
        return std::pair{std::move(s2), std::move(l2)};
    };

    SynthResult out;
    auto [train_x, train_y] = draw_block(cfg.trained_families);
    out.train.samples = std::move(train_x);
    out.train.labels = std::move(train_y);
    out.train.class_names.assign(names.begin(), names.begin() + cfg.trained_families);
    out.train.feature_names = feature_names;

    auto [stream_x, stream_y] = draw_block(cfg.families);
    out.stream.samples = std::move(stream_x);
    out.stream.labels = std::move(stream_y);
    out.stream.label_names = names;
    out.stream.feature_names = feature_names;
    return out;
}

}  // namespace malstream
