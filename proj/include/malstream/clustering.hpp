#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "malstream/core.hpp"
#include "malstream/rng.hpp"

namespace malstream {

// Where a consumed sample went, and how far it was from that center when the
// decision was made. A sample that founds a new cluster has distance 0.
struct ClusterAssignment {
    std::size_t cluster_id = 0;
    double distance = 0.0;
};

namespace detail {

// Nearest center by Euclidean distance, ties to the lowest index. Shared by
// the k-means update and the SOM winner search so the two rules agree exactly.
inline std::pair<std::size_t, double> nearest_center(const std::vector<FeatureVector>& centers,
                                                     const FeatureVector& x) {
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - centers[i][d];
            s += diff * diff;
        }
        if (s < best) {
            best = s;
            arg = i;
        }
    }
    return {arg, std::sqrt(best)};
}

// Running-mean step shared by every cluster-center update in this module:
// mu += (1/n) (x - mu).
inline void pull_toward(FeatureVector& center, const FeatureVector& x, double step) {
    for (std::size_t d = 0; d < center.size(); ++d) center[d] += step * (x[d] - center[d]);
}

}  // namespace detail

// Single-pass clusterer. consume() must be called in stream order from one
// writer; centers() and assignments() are read-only snapshots between calls.
class OnlineClusterer {
public:
    virtual ~OnlineClusterer() = default;

    virtual ClusterAssignment consume(const FeatureVector& x) = 0;
    virtual std::size_t cluster_count() const = 0;
    virtual const std::vector<FeatureVector>& centers() const = 0;
    virtual std::string name() const = 0;

    // Assignment decided at consumption time for each consumed sample, never
    // revised afterwards.
    const std::vector<ClusterAssignment>& assignments() const {
        if (log_.empty()) throw data_error("clusterer: no samples consumed yet");
        return log_;
    }

    std::size_t consumed() const { return log_.size(); }

protected:
    ClusterAssignment record(ClusterAssignment a) {
        log_.push_back(a);
        return a;
    }

private:
    std::vector<ClusterAssignment> log_;
};

enum class OkmInitPolicy { first_k, random_unit };

// MacQueen-style sequential k-means: assign to the nearest centroid, then
// move it by 1/n of the gap. Centroids start as the first k distinct stream
// vectors (each counting as its own first member) or as seeded random unit
// vectors with zero counts.
class OkmClusterer : public OnlineClusterer {
public:
    explicit OkmClusterer(std::size_t k) : k_(k), policy_(OkmInitPolicy::first_k) {
        if (k < 1) throw data_error("okm: k must be >= 1");
    }

    OkmClusterer(std::size_t k, std::size_t dim, std::uint64_t seed)
        : k_(k), policy_(OkmInitPolicy::random_unit) {
        if (k < 1) throw data_error("okm: k must be >= 1");
        if (dim < 1) throw data_error("okm: dim must be >= 1");
        Rng rng(seed);
        for (std::size_t i = 0; i < k; ++i) {
            FeatureVector c(dim);
            double norm = 0.0;
            for (double& v : c) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm == 0.0) norm = 1.0;
            for (double& v : c) v /= norm;
            centroids_.push_back(std::move(c));
        }
        counts_.assign(k, 0);
    }

    ClusterAssignment consume(const FeatureVector& x) override {
        if (!centroids_.empty()) require_dim(x, centroids_.front().size(), "okm");
        if (policy_ == OkmInitPolicy::first_k && centroids_.size() < k_) {
            for (std::size_t i = 0; i < centroids_.size(); ++i)
                if (centroids_[i] == x) {  // duplicate of a seed point
                    ++counts_[i];
                    return record({i, 0.0});
                }
            centroids_.push_back(x);
            counts_.push_back(1);
            return record({centroids_.size() - 1, 0.0});
        }
        const auto [idx, dist] = detail::nearest_center(centroids_, x);
        ++counts_[idx];
        detail::pull_toward(centroids_[idx], x, 1.0 / static_cast<double>(counts_[idx]));
        return record({idx, dist});
    }

    std::size_t cluster_count() const override { return centroids_.size(); }
    const std::vector<FeatureVector>& centers() const override { return centroids_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::string name() const override { return "okm"; }

private:
    std::size_t k_;
    OkmInitPolicy policy_;
    std::vector<FeatureVector> centroids_;
    std::vector<std::uint64_t> counts_;
};

// Basic Sequential Algorithmic Scheme: the first sample founds cluster 0;
// afterwards a sample farther than theta from every centroid founds a new
// cluster while fewer than q exist, otherwise it merges into the nearest
// centroid's running mean.
class BsasClusterer : public OnlineClusterer {
public:
    BsasClusterer(double theta, std::size_t max_clusters) : theta_(theta), q_(max_clusters) {
        if (!(theta > 0.0)) throw data_error("bsas: theta must be > 0");
        if (q_ < 1) throw data_error("bsas: max cluster count must be >= 1");
    }

    ClusterAssignment consume(const FeatureVector& x) override {
        if (centroids_.empty()) {
            centroids_.push_back(x);
            counts_.push_back(1);
            return record({0, 0.0});
        }
        require_dim(x, centroids_.front().size(), "bsas");
        const auto [idx, dist] = detail::nearest_center(centroids_, x);
        if (dist > theta_ && centroids_.size() < q_) {
            centroids_.push_back(x);
            counts_.push_back(1);
            return record({centroids_.size() - 1, 0.0});
        }
        ++counts_[idx];
        detail::pull_toward(centroids_[idx], x, 1.0 / static_cast<double>(counts_[idx]));
        return record({idx, dist});
    }

    std::size_t cluster_count() const override { return centroids_.size(); }
    const std::vector<FeatureVector>& centers() const override { return centroids_; }
    double theta() const { return theta_; }
    std::size_t max_clusters() const { return q_; }
    std::string name() const override { return "bsas"; }

private:
    double theta_;
    std::size_t q_;
    std::vector<FeatureVector> centroids_;
    std::vector<std::uint64_t> counts_;
};

enum class SomTopology { chain, grid };

enum class SomSchedule {
    exponential,   // alpha(t) = alpha0 exp(-t/lambda), sigma likewise
    inverse_count  // winner-only, alpha = 1/wins(winner); k-means equivalent
};

struct SomConfig {
    std::size_t n_neurons = 4;
    SomTopology topology = SomTopology::chain;
    std::size_t grid_rows = 0;  // used when topology == grid
    std::size_t grid_cols = 0;
    double alpha0 = 0.3;
    double sigma0 = 0.0;  // <= 0 means n_neurons / 4.0, floored at 1
    double decay = 500.0;
    SomSchedule schedule = SomSchedule::exponential;
    std::uint64_t seed = 0;
    // Per-dimension init range; empty means [-1, 1] everywhere.
    std::vector<std::pair<double, double>> init_range;

    void validate() const {
        if (n_neurons < 1) throw data_error("som: need at least 1 neuron");
        if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw data_error("som: alpha0 must be in (0, 1]");
        if (!(decay > 0.0)) throw data_error("som: decay must be > 0");
        if (topology == SomTopology::grid && grid_rows * grid_cols != n_neurons)
            throw data_error("som: grid_rows * grid_cols must equal n_neurons");
    }
};

// Kohonen map used as a clusterer: each neuron is a cluster center. The
// winner and its topological neighbours move toward every input under a
// Gaussian neighbourhood that narrows over time.
class SomClusterer : public OnlineClusterer {
public:
    SomClusterer(SomConfig cfg, std::size_t dim) : cfg_(cfg) {
        cfg_.validate();
        if (dim < 1) throw data_error("som: dim must be >= 1");
        Rng rng(cfg_.seed);
        for (std::size_t i = 0; i < cfg_.n_neurons; ++i) {
            FeatureVector w(dim);
            for (std::size_t d = 0; d < dim; ++d) {
                const auto [lo, hi] = d < cfg_.init_range.size() ? cfg_.init_range[d]
                                                                 : std::pair{-1.0, 1.0};
                w[d] = rng.uniform(lo, hi);
            }
            weights_.push_back(std::move(w));
        }
        finish_init();
    }

    // Start from explicit weights (one per neuron).
    SomClusterer(SomConfig cfg, std::vector<FeatureVector> initial_weights)
        : cfg_(cfg), weights_(std::move(initial_weights)) {
        cfg_.validate();
        if (weights_.size() != cfg_.n_neurons)
            throw data_error("som: initial weight count must equal n_neurons");
        finish_init();
    }

    std::size_t winner(const FeatureVector& x) const {
        require_dim(x, weights_.front().size(), "som");
        return detail::nearest_center(weights_, x).first;
    }

    ClusterAssignment consume(const FeatureVector& x) override {
        require_dim(x, weights_.front().size(), "som");
        const auto [c, dist] = detail::nearest_center(weights_, x);

        if (cfg_.schedule == SomSchedule::inverse_count) {
            ++wins_[c];
            detail::pull_toward(weights_[c], x, 1.0 / static_cast<double>(wins_[c]));
        } else {
            const double t = static_cast<double>(clock_);
            const double alpha = cfg_.alpha0 * std::exp(-t / cfg_.decay);
            const double sigma = std::max(1e-3, sigma0_ * std::exp(-t / cfg_.decay));
            const double inv = 1.0 / (2.0 * sigma * sigma);
            for (std::size_t i = 0; i < weights_.size(); ++i) {
                const double d2 = grid_distance_sq(c, i);
                const double h = std::exp(-d2 * inv);
                if (h == 0.0) continue;
                detail::pull_toward(weights_[i], x, alpha * h);
            }
        }
        ++clock_;
        return record({c, dist});
    }

    std::size_t cluster_count() const override { return weights_.size(); }
    const std::vector<FeatureVector>& centers() const override { return weights_; }
    std::uint64_t clock() const { return clock_; }
    double learning_rate_at(std::uint64_t t) const {
        return cfg_.alpha0 * std::exp(-static_cast<double>(t) / cfg_.decay);
    }
    double neighborhood_width_at(std::uint64_t t) const {
        return std::max(1e-3, sigma0_ * std::exp(-static_cast<double>(t) / cfg_.decay));
    }
    std::string name() const override { return "som"; }

private:
    void finish_init() {
        for (const auto& w : weights_)
            if (!all_finite(w)) throw data_error("som: non-finite initial weight");
        sigma0_ = cfg_.sigma0 > 0.0
                      ? cfg_.sigma0
                      : std::max(1.0, static_cast<double>(cfg_.n_neurons) / 4.0);
        wins_.assign(weights_.size(), 0);
    }

    // Squared distance between neuron positions in the output topology.
    double grid_distance_sq(std::size_t a, std::size_t b) const {
        if (cfg_.topology == SomTopology::chain) {
            const double d = static_cast<double>(a) - static_cast<double>(b);
            return d * d;
        }
        const double dr = static_cast<double>(a / cfg_.grid_cols) -
                          static_cast<double>(b / cfg_.grid_cols);
        const double dc = static_cast<double>(a % cfg_.grid_cols) -
                          static_cast<double>(b % cfg_.grid_cols);
        return dr * dr + dc * dc;
    }

    SomConfig cfg_;
    std::vector<FeatureVector> weights_;
    std::vector<std::uint64_t> wins_;
    double sigma0_ = 1.0;
    std::uint64_t clock_ = 0;
};

// Runtime clusterer selection, mirrored by the pipeline JSON config.
struct ClustererConfig {
    std::string algorithm = "okm";  // okm | bsas | som
    std::size_t clusters = 4;
    double theta = 1.0;
    std::size_t q = 0;  // 0 means use `clusters`
    double alpha0 = 0.3;
    double sigma0 = 0.0;
    double decay = 500.0;
    std::string schedule = "exp";  // exp | inverse-count
    std::string topology = "chain";
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::string okm_init = "first-k";  // first-k | random
    std::uint64_t seed = 0;
};

inline std::unique_ptr<OnlineClusterer> make_clusterer(const ClustererConfig& cfg,
                                                       std::size_t dim) {
    if (cfg.algorithm == "okm") {
        if (cfg.okm_init == "random")
            return std::make_unique<OkmClusterer>(cfg.clusters, dim, cfg.seed);
        if (cfg.okm_init != "first-k")
            throw data_error("okm: unknown init policy '" + cfg.okm_init + "'");
        return std::make_unique<OkmClusterer>(cfg.clusters);
    }
    if (cfg.algorithm == "bsas") {
        const std::size_t q = cfg.q > 0 ? cfg.q : cfg.clusters;
        return std::make_unique<BsasClusterer>(cfg.theta, q);
    }
    if (cfg.algorithm == "som") {
        SomConfig som;
        som.n_neurons = cfg.clusters;
        som.alpha0 = cfg.alpha0;
        som.sigma0 = cfg.sigma0;
        som.decay = cfg.decay;
        som.seed = cfg.seed;
        if (cfg.schedule == "inverse-count")
            som.schedule = SomSchedule::inverse_count;
        else if (cfg.schedule != "exp")
            throw data_error("som: unknown schedule '" + cfg.schedule + "'");
        if (cfg.topology == "grid") {
            som.topology = SomTopology::grid;
            som.grid_rows = cfg.grid_rows;
            som.grid_cols = cfg.grid_cols;
        } else if (cfg.topology != "chain") {
            throw data_error("som: unknown topology '" + cfg.topology + "'");
        }
        return std::make_unique<SomClusterer>(som, dim);
    }
    throw data_error("unknown clustering algorithm '" + cfg.algorithm + "'");
}

}  // namespace malstream
