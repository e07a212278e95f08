#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vnfad/autoencoder.hpp"
#include "vnfad/error.hpp"

namespace vnfad {

struct RosterEntry {
    AutoencoderShape shape;
    double learning_rate = 0.01;

    friend bool operator==(const RosterEntry&, const RosterEntry&) = default;
};

/// Candidate encoders, in roster order.
struct RosterSpec {
    std::vector<RosterEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    friend bool operator==(const RosterSpec&, const RosterSpec&) = default;
};

inline const std::vector<double>& default_learning_rates() {
    static const std::vector<double> rates{0.05, 0.01, 0.002};
    return rates;
}

/// Two shapes ([d, ceil(d/2), d] and a deeper [d, ceil(3d/4), ceil(d/4), ceil(3d/4), d])
/// crossed with the learning rates, shape-major.
inline RosterSpec default_roster(std::size_t d,
                                 const std::vector<double>& learning_rates = default_learning_rates()) {
    if (d == 0) throw ConfigError("default_roster: dimension must be positive");
    if (learning_rates.empty()) throw ConfigError("default_roster: no learning rates");
    auto ceil_div = [](std::size_t num, std::size_t den) {
        return std::max<std::size_t>(1, (num + den - 1) / den);
    };
    const std::vector<AutoencoderShape> shapes{
        {{d, ceil_div(d, 2), d}},
        {{d, ceil_div(3 * d, 4), ceil_div(d, 4), ceil_div(3 * d, 4), d}},
    };
    RosterSpec roster;
    for (const auto& shape : shapes)
        for (double rate : learning_rates) roster.entries.push_back({shape, rate});
    return roster;
}

/// Thresholding rule: an encoder flags a point when its cost exceeds
/// beta times its validation mean cost; the point is an anomaly when more
/// than alpha of the m kept encoders flag it.
struct ThresholdConfig {
    std::size_t m = 4;
    double beta = 4.0;
    std::size_t alpha = 2;

    friend bool operator==(const ThresholdConfig&, const ThresholdConfig&) = default;
};

inline void validate(const ThresholdConfig& tc, std::size_t roster_size) {
    if (tc.m == 0) throw ConfigError("threshold: m must be positive");
    if (tc.m > roster_size)
        throw ConfigError("threshold: m=" + std::to_string(tc.m) + " exceeds roster size " +
                          std::to_string(roster_size));
    if (tc.alpha >= tc.m) throw ConfigError("threshold: alpha must be smaller than m");
    if (!(tc.beta > 1.0) || !std::isfinite(tc.beta))
        throw ConfigError("threshold: beta must be a finite value greater than 1");
}

inline constexpr double kValidationCostFloor = 1e-12;

struct KeptEncoder {
    AutoencoderModel model;
    double validation_cost = 0.0;  ///< mean validation cost, floored at kValidationCostFloor
    std::size_t roster_index = 0;

    friend bool operator==(const KeptEncoder&, const KeptEncoder&) = default;
};

struct EnsembleModel {
    std::vector<KeptEncoder> kept;  ///< ascending validation cost
    ThresholdConfig config;

    friend bool operator==(const EnsembleModel&, const EnsembleModel&) = default;
};

struct Verdict {
    std::vector<double> costs;
    std::vector<bool> suspicious;
    std::size_t suspicious_count = 0;
    bool anomaly = false;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct TimedVerdict {
    std::int64_t timestamp = 0;
    Verdict verdict;

    friend bool operator==(const TimedVerdict&, const TimedVerdict&) = default;
};

/// Indices of the m smallest values, ascending by (value, index).
inline std::vector<std::size_t> select_best(std::span<const double> validation_costs,
                                            std::size_t m) {
    if (m > validation_costs.size()) throw ConfigError("select_best: m exceeds candidate count");
    std::vector<std::size_t> idx(validation_costs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return validation_costs[a] < validation_costs[b];
    });
    idx.resize(m);
    return idx;
}

/// Applies the beta/alpha rule to per-encoder costs. Both comparisons are strict.
inline Verdict decide(std::span<const double> costs, std::span<const double> validation_costs,
                      const ThresholdConfig& tc) {
    Verdict v;
    v.costs.assign(costs.begin(), costs.end());
    v.suspicious.resize(costs.size());
    for (std::size_t l = 0; l < costs.size(); ++l) {
        v.suspicious[l] = costs[l] > tc.beta * validation_costs[l];
        if (v.suspicious[l]) ++v.suspicious_count;
    }
    v.anomaly = v.suspicious_count > tc.alpha;
    return v;
}

inline double mean_cost(const AutoencoderModel& m, std::span<const std::vector<double>> rows) {
    double total = 0.0;
    for (const auto& x : rows) total += cost(m, x);
    return total / static_cast<double>(rows.size());
}

// Keeps the shuffle stream of an encoder distinct from its initialization stream.
inline constexpr std::uint64_t kShuffleSalt = 0x5851f42d4c957f2dULL;

/// Trains every roster entry (concurrently), measures validation mean costs,
/// and keeps the m best encoders.
inline EnsembleModel fit_ensemble(const RosterSpec& roster,
                                  std::span<const std::vector<double>> train_rows,
                                  std::span<const std::vector<double>> validation_rows,
                                  const TrainConfig& cfg, const ThresholdConfig& tc) {
    if (roster.entries.empty()) throw ConfigError("fit_ensemble: empty roster");
    validate(tc, roster.size());
    if (train_rows.empty() || validation_rows.empty())
        throw DataError("fit_ensemble: training and validation sets must be non-empty");
    const std::size_t d = roster.entries.front().shape.input_dimension();
    for (const auto& entry : roster.entries) {
        validate(entry.shape);
        if (entry.shape.input_dimension() != d)
            throw ConfigError("fit_ensemble: roster shapes disagree on input dimension");
    }

    std::vector<std::future<KeptEncoder>> jobs;
    jobs.reserve(roster.size());
    for (std::size_t l = 0; l < roster.size(); ++l) {
        jobs.push_back(std::async(std::launch::async, [&, l] {
            const std::uint64_t seed = cfg.rng_seed + l;
            TrainConfig encoder_cfg = cfg;
            encoder_cfg.rng_seed = seed ^ kShuffleSalt;
            const auto& entry = roster.entries[l];
            KeptEncoder fitted;
            fitted.model = train(init(entry.shape, entry.learning_rate, seed), train_rows, encoder_cfg);
            fitted.validation_cost =
                std::max(mean_cost(fitted.model, validation_rows), kValidationCostFloor);
            fitted.roster_index = l;
            return fitted;
        }));
    }
    std::vector<KeptEncoder> all;
    all.reserve(jobs.size());
    for (auto& job : jobs) job.wait();
    for (auto& job : jobs) all.push_back(job.get());

    std::vector<double> costs;
    for (const auto& e : all) costs.push_back(e.validation_cost);
    EnsembleModel em;
    em.config = tc;
    for (std::size_t idx : select_best(costs, tc.m)) em.kept.push_back(std::move(all[idx]));
    return em;
}

/// Per-encoder costs and the thresholded verdict for one normalized point.
inline Verdict score(const EnsembleModel& em, std::span<const double> z) {
    std::vector<double> costs;
    std::vector<double> baselines;
    costs.reserve(em.kept.size());
    baselines.reserve(em.kept.size());
    for (const auto& e : em.kept) {
        costs.push_back(cost(e.model, z));
        baselines.push_back(e.validation_cost);
    }
    return decide(costs, baselines, em.config);
}

}  // namespace vnfad
