#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vnfad/ensemble.hpp"
#include "vnfad/error.hpp"
#include "vnfad/rng.hpp"
#include "vnfad/telemetry.hpp"

namespace vnfad {

inline constexpr double kMiB = 1024.0 * 1024.0;
inline constexpr double kGiB = 1024.0 * kMiB;

enum class ScenarioKind { healthy, leak, cpu_spike, traffic_drop };

inline std::string_view to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::healthy: return "healthy";
        case ScenarioKind::leak: return "leak";
        case ScenarioKind::cpu_spike: return "cpu_spike";
        case ScenarioKind::traffic_drop: return "traffic_drop";
    }
    return "healthy";
}

inline std::optional<ScenarioKind> parse_scenario(std::string_view name) {
    for (auto kind : {ScenarioKind::healthy, ScenarioKind::leak, ScenarioKind::cpu_spike,
                      ScenarioKind::traffic_drop})
        if (to_string(kind) == name) return kind;
    return std::nullopt;
}

/// Synthetic firewall VNF run. Memory sizes use binary units (MB read as MiB).
struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::healthy;
    std::int64_t duration_s = 1800;
    std::int64_t sample_period_s = 10;
    std::int64_t fault_start_s = 0;
    std::uint64_t rng_seed = 42;
    double capacity_bytes = kGiB;
    double leak_rate = 200.0 * kMiB;  ///< bytes per minute

    bool has_fault() const noexcept { return kind != ScenarioKind::healthy; }
};

inline void validate(const ScenarioSpec& spec) {
    if (spec.duration_s <= 0) throw ConfigError("scenario: duration must be positive");
    if (spec.sample_period_s <= 0) throw ConfigError("scenario: sample period must be positive");
    if (!(spec.capacity_bytes > 0.0)) throw ConfigError("scenario: capacity must be positive");
    if (!(spec.leak_rate > 0.0)) throw ConfigError("scenario: leak rate must be positive");
    if (spec.has_fault() && (spec.fault_start_s < 0 || spec.fault_start_s >= spec.duration_s))
        throw ConfigError("scenario: fault start must lie in [0, duration)");
}

/// Healthy-regime waveform constants.
namespace sim {
inline constexpr double kCpuBase = 10.0;
inline constexpr double kCpuSwing = 5.0;
inline constexpr double kCpuNoise = 2.0;
inline constexpr double kCpuSpikeLevel = 85.0;
inline constexpr double kMemBase = 300.0 * kMiB;
inline constexpr double kMemNoise = 5.0 * kMiB;
inline constexpr double kNoCacheRatio = 0.8;
inline constexpr double kNoCacheNoise = 2.0 * kMiB;
inline constexpr double kDiskSize = 10.0 * kGiB;
inline constexpr double kDiskStart = 0.40;
inline constexpr double kDiskGrowth = 0.01;
inline constexpr double kNetBase = 5e6;
inline constexpr double kNetSwing = 0.3;
inline constexpr double kNetNoise = 0.05;
inline constexpr double kTrafficDropFactor = 0.05;
inline constexpr double kDiurnalPeriod = 3600.0;
inline constexpr double kSaturation = 0.97;
}  // namespace sim

/// Memory in use under the leak fault at time t, given the healthy baseline.
inline double leaked_memory(const ScenarioSpec& spec, std::int64_t t, double baseline) {
    if (t < spec.fault_start_s) return baseline;
    const auto minutes = static_cast<double>((t - spec.fault_start_s) / 60);
    return std::min(baseline + spec.leak_rate * minutes, sim::kSaturation * spec.capacity_bytes);
}

/// Generates one labeled trace. The random draws per record are identical
/// across scenario kinds, so a fault trace equals the healthy trace of the
/// same seed before the fault starts.
inline LabeledDataset generate(const ScenarioSpec& spec) {
    validate(spec);
    using namespace sim;
    LabeledDataset out;
    out.data.schema = FeatureSchema::default_schema();
    Rng rng(spec.rng_seed);
    const double duration = static_cast<double>(spec.duration_s);

    for (std::int64_t t = 0; t < spec.duration_s; t += spec.sample_period_s) {
        const double phase = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / kDiurnalPeriod);
        const double cpu_noise = rng.normal(0.0, kCpuNoise);
        const double mem_noise = rng.normal(0.0, kMemNoise);
        const double nocache_noise = rng.normal(0.0, kNoCacheNoise);
        const double in_noise = rng.normal(0.0, kNetNoise);
        const double out_noise = rng.normal(0.0, kNetNoise);

        const bool faulty = spec.has_fault() && t >= spec.fault_start_s;

        double cpu = kCpuBase + kCpuSwing * phase + cpu_noise;
        if (faulty && spec.kind == ScenarioKind::cpu_spike) cpu = kCpuSpikeLevel + cpu_noise;
        cpu = std::clamp(cpu, 0.0, 100.0);

        double mem = std::max(0.0, kMemBase + mem_noise);
        if (faulty && spec.kind == ScenarioKind::leak) mem = leaked_memory(spec, t, mem);
        const double nocache = std::max(0.0, kNoCacheRatio * mem + nocache_noise);

        const double disk = kDiskSize * (kDiskStart + kDiskGrowth * static_cast<double>(t) / duration);

        double net_in = std::max(0.0, kNetBase * (1.0 + kNetSwing * phase) * (1.0 + in_noise));
        double net_out = std::max(0.0, kNetBase * (1.0 + kNetSwing * phase) * (1.0 + out_noise));
        if (faulty && spec.kind == ScenarioKind::traffic_drop) {
            net_in *= kTrafficDropFactor;
            net_out *= kTrafficDropFactor;
        }

        out.data.records.push_back({t, {cpu, mem, nocache, disk, net_in, net_out}});
        out.labels.push_back(faulty ? Label::fault : Label::normal);
    }
    return out;
}

/// Detection quality against ground truth. Ratios with a zero denominator
/// are left empty (undefined).
struct Metrics {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t true_negatives = 0;
    std::size_t false_negatives = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> false_positive_rate;
    std::optional<std::int64_t> fault_start;
    std::optional<std::int64_t> latency_s;  ///< first anomaly at/after fault_start minus fault_start
};

inline Metrics evaluate(std::span<const std::int64_t> timestamps,
                        const std::vector<bool>& anomalies, const LabeledDataset& truth) {
    if (timestamps.size() != anomalies.size())
        throw ContractError("evaluate: timestamp and verdict counts differ");
    if (truth.labels.size() != truth.data.size())
        throw DataError("evaluate: truth labels do not align with records");
    if (timestamps.size() != truth.data.size())
        throw DataError("evaluate: " + std::to_string(timestamps.size()) + " verdicts for " +
                        std::to_string(truth.data.size()) + " truth records");
    Metrics m;
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (timestamps[i] != truth.data.records[i].timestamp)
            throw DataError("evaluate: timestamp mismatch at row " + std::to_string(i + 1));
        const bool fault = truth.labels[i] == Label::fault;
        if (fault && !m.fault_start) m.fault_start = timestamps[i];
        if (anomalies[i] && fault) ++m.true_positives;
        if (anomalies[i] && !fault) ++m.false_positives;
        if (!anomalies[i] && fault) ++m.false_negatives;
        if (!anomalies[i] && !fault) ++m.true_negatives;
        if (anomalies[i] && m.fault_start && !m.latency_s && timestamps[i] >= *m.fault_start)
            m.latency_s = timestamps[i] - *m.fault_start;
    }
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.true_positives, m.true_positives + m.false_positives);
    m.recall = ratio(m.true_positives, m.true_positives + m.false_negatives);
    m.false_positive_rate = ratio(m.false_positives, m.false_positives + m.true_negatives);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

inline Metrics evaluate(std::span<const TimedVerdict> verdicts, const LabeledDataset& truth) {
    std::vector<std::int64_t> ts;
    std::vector<bool> anomalies;
    for (const auto& v : verdicts) {
        ts.push_back(v.timestamp);
        anomalies.push_back(v.verdict.anomaly);
    }
    return evaluate(ts, anomalies, truth);
}

}  // namespace vnfad
