#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vnfad/error.hpp"
#include "vnfad/normal.hpp"
#include "vnfad/telemetry.hpp"

namespace vnfad {

inline constexpr double kDefaultMixWeight = 0.05;

/// Smoothed distribution model of one feature.
///
/// The empirical distribution is replaced by a piecewise-linear function
/// through (knot_values[j], knot_probs[j]), where knot_probs are the jump
/// midpoints (C_j - c_j / 2) / n. Beyond the outermost knots the piecewise
/// part decays exponentially with scale `stddev`, so it reaches 0 and 1 only
/// asymptotically. A Gaussian N(mean, stddev^2) cdf is then mixed in with
/// weight `mix_weight`:
///
///     F(x) = (1 - w) * F_pl(x) + w * Phi((x - mean) / stddev)
///
/// F is continuous, strictly increasing and maps R onto (0, 1).
struct FeatureNormalizer {
    std::vector<double> knot_values;
    std::vector<double> knot_probs;
    double mean = 0.0;
    double stddev = 1.0;
    double mix_weight = kDefaultMixWeight;

    friend bool operator==(const FeatureNormalizer&, const FeatureNormalizer&) = default;
};

/// Both tails of F at one point, each computed without cancellation.
struct TailPair {
    double lower;  ///< F(x)
    double upper;  ///< 1 - F(x)
};

/// Throws ModelError if the invariants of a (possibly deserialized) model fail.
inline void validate(const FeatureNormalizer& fn) {
    const auto& u = fn.knot_values;
    const auto& q = fn.knot_probs;
    if (u.empty() || u.size() != q.size())
        throw ModelError("normalizer: knot arrays empty or of unequal length");
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (!std::isfinite(u[j]) || !(q[j] > 0.0 && q[j] < 1.0))
            throw ModelError("normalizer: knot " + std::to_string(j) + " out of range");
        if (j > 0 && !(u[j] > u[j - 1] && q[j] > q[j - 1]))
            throw ModelError("normalizer: knots not strictly increasing at " + std::to_string(j));
    }
    if (!std::isfinite(fn.mean)) throw ModelError("normalizer: non-finite mean");
    if (!(fn.stddev > 0.0) || !std::isfinite(fn.stddev))
        throw ModelError("normalizer: stddev must be positive and finite");
    if (!(fn.mix_weight > 0.0 && fn.mix_weight <= 1.0))
        throw ModelError("normalizer: mix weight must lie in (0, 1]");
}

/// Fits the smoothed distribution model to one column of training values.
inline FeatureNormalizer fit_feature(std::span<const double> column,
                                     double mix_weight = kDefaultMixWeight) {
    if (column.empty()) throw DataError("fit_feature: empty column");
    if (!(mix_weight > 0.0 && mix_weight <= 1.0))
        throw ConfigError("fit_feature: mix weight must lie in (0, 1]");
    for (double v : column)
        if (!std::isfinite(v)) throw DataError("fit_feature: non-finite value");

    std::vector<double> sorted(column.begin(), column.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());

    FeatureNormalizer fn;
    fn.mix_weight = mix_weight;
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const std::size_t count = j - i;
        cumulative += count;
        fn.knot_values.push_back(sorted[i]);
        fn.knot_probs.push_back((static_cast<double>(cumulative) - 0.5 * static_cast<double>(count)) / n);
        i = j;
    }

    fn.mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : column) sq += (v - fn.mean) * (v - fn.mean);
    fn.stddev = column.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;

    if (fn.knot_values.size() == 1 || !(fn.stddev > 0.0)) {
        // Constant feature: the Gaussian alone carries the model.
        fn.mix_weight = 1.0;
        fn.stddev = std::max(std::abs(fn.knot_values.front()), 1.0) * 1e-3 + 1e-9;
    }
    return fn;
}

namespace detail {

inline TailPair piecewise_tails(const FeatureNormalizer& fn, double x) {
    const auto& u = fn.knot_values;
    const auto& q = fn.knot_probs;
    if (x <= u.front()) {
        const double lower = q.front() * std::exp(-(u.front() - x) / fn.stddev);
        return {lower, 1.0 - lower};
    }
    if (x >= u.back()) {
        const double upper = (1.0 - q.back()) * std::exp(-(x - u.back()) / fn.stddev);
        return {1.0 - upper, upper};
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), x) - u.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - u[lo]) / (u[hi] - u[lo]);
    const double lower = q[lo] + (q[hi] - q[lo]) * t;
    const double upper = (1.0 - q[lo]) - (q[hi] - q[lo]) * t;
    return {lower, upper};
}

inline double piecewise_density(const FeatureNormalizer& fn, double x) {
    const auto& u = fn.knot_values;
    const auto& q = fn.knot_probs;
    if (x <= u.front()) return q.front() * std::exp(-(u.front() - x) / fn.stddev) / fn.stddev;
    if (x >= u.back()) return (1.0 - q.back()) * std::exp(-(x - u.back()) / fn.stddev) / fn.stddev;
    const auto hi = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), x) - u.begin());
    return (q[hi] - q[hi - 1]) / (u[hi] - u[hi - 1]);
}

}  // namespace detail

inline TailPair cdf_tails(const FeatureNormalizer& fn, double x) {
    const double w = fn.mix_weight;
    const double z = (x - fn.mean) / fn.stddev;
    if (w >= 1.0) return {normal_cdf(z), normal_sf(z)};
    const TailPair pl = detail::piecewise_tails(fn, x);
    return {(1.0 - w) * pl.lower + w * normal_cdf(z), (1.0 - w) * pl.upper + w * normal_sf(z)};
}

/// F(x).
inline double cdf(const FeatureNormalizer& fn, double x) { return cdf_tails(fn, x).lower; }

/// dF/dx.
inline double density(const FeatureNormalizer& fn, double x) {
    const double w = fn.mix_weight;
    const double gauss = normal_pdf((x - fn.mean) / fn.stddev) / fn.stddev;
    if (w >= 1.0) return gauss;
    return (1.0 - w) * detail::piecewise_density(fn, x) + w * gauss;
}

/// Phi^-1(F(x)). The quantile is taken on whichever tail is smaller, so values
/// far outside the training support keep distinct images until the tail
/// probability underflows (about 745 stddev out, |z| ~ 38), where the result saturates.
inline double transform_value(const FeatureNormalizer& fn, double x) {
    constexpr double kTiny = std::numeric_limits<double>::denorm_min();
    const TailPair t = cdf_tails(fn, x);
    if (t.lower <= 0.5) return normal_quantile(std::max(t.lower, kTiny));
    return -normal_quantile(std::max(t.upper, kTiny));
}

/// Solves transform_value(fn, x) = z by bracketed Newton iteration.
inline double inverse_value(const FeatureNormalizer& fn, double z) {
    if (!std::isfinite(z)) throw DomainError("inverse_transform: non-finite input");
    const bool lower_side = z <= 0.0;
    const double target = lower_side ? normal_cdf(z) : normal_sf(z);

    // g is strictly increasing in x and vanishes at the solution.
    auto g = [&](double x) {
        const TailPair t = cdf_tails(fn, x);
        return lower_side ? t.lower - target : target - t.upper;
    };

    const double start = fn.mean + z * fn.stddev;
    double lo = start;
    double hi = start;
    double step = fn.stddev * std::max(1.0, std::abs(z));
    for (int i = 0; i < 2100 && g(lo) > 0.0; ++i, step *= 2.0) lo = start - step;
    step = fn.stddev * std::max(1.0, std::abs(z));
    for (int i = 0; i < 2100 && g(hi) < 0.0; ++i, step *= 2.0) hi = start + step;
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw DomainError("inverse_transform: no finite preimage for z=" + std::to_string(z));

    double x = std::clamp(start, lo, hi);
    for (int iter = 0; iter < 400; ++iter) {
        const double gx = g(x);
        if (gx == 0.0) return x;
        if (gx < 0.0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)))
            break;
        const double slope = density(fn, x);
        double next = slope > 0.0 ? x - gx / slope : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

/// Per-feature normalizers for a whole schema.
struct Normalizer {
    FeatureSchema schema;
    std::vector<FeatureNormalizer> per_feature;

    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

inline Normalizer fit_normalizer(const Dataset& ds, double mix_weight = kDefaultMixWeight) {
    Normalizer nz{ds.schema, {}};
    nz.per_feature.reserve(ds.schema.dimension());
    for (std::size_t k = 0; k < ds.schema.dimension(); ++k) {
        const auto column = ds.column(k);
        nz.per_feature.push_back(fit_feature(column, mix_weight));
    }
    return nz;
}

inline std::vector<double> transform(const Normalizer& nz, const MetricRecord& rec) {
    check_record(nz.schema, rec);
    std::vector<double> out(rec.values.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = transform_value(nz.per_feature[k], rec.values[k]);
    return out;
}

inline std::vector<std::vector<double>> transform(const Normalizer& nz, const Dataset& ds) {
    std::vector<std::vector<double>> out;
    out.reserve(ds.size());
    for (const auto& rec : ds.records) out.push_back(transform(nz, rec));
    return out;
}

inline std::vector<double> inverse_transform(const Normalizer& nz, std::span<const double> z) {
    if (z.size() != nz.per_feature.size())
        throw ContractError("inverse_transform: dimension mismatch");
    std::vector<double> out(z.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = inverse_value(nz.per_feature[k], z[k]);
    return out;
}

}  // namespace vnfad
