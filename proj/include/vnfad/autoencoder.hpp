#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vnfad/error.hpp"
#include "vnfad/rng.hpp"

namespace vnfad {

/// Layer widths [d, h_1, ..., h_r, d]; at least one hidden layer.
struct AutoencoderShape {
    std::vector<std::size_t> widths;

    std::size_t input_dimension() const { return widths.empty() ? 0 : widths.front(); }
    std::size_t layer_count() const { return widths.empty() ? 0 : widths.size() - 1; }

    friend bool operator==(const AutoencoderShape&, const AutoencoderShape&) = default;
};

inline void validate(const AutoencoderShape& shape) {
    const auto& w = shape.widths;
    if (w.size() < 3) throw ConfigError("autoencoder shape needs at least one hidden layer");
    for (auto width : w)
        if (width == 0) throw ConfigError("autoencoder layer widths must be positive");
    if (w.front() != w.back())
        throw ConfigError("autoencoder output width must equal input width");
}

inline std::string to_string(const AutoencoderShape& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.widths.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(shape.widths[i]);
    }
    return out;
}

/// Affine map; weights are row-major, outputs x inputs.
struct Layer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    double& weight(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
    double weight(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Gradient with the same layout as the model parameters.
using Gradient = std::vector<Layer>;

/// Dense autoencoder: tanh on hidden layers, identity on the output layer.
struct AutoencoderModel {
    AutoencoderShape shape;
    std::vector<Layer> layers;
    double learning_rate = 0.01;

    friend bool operator==(const AutoencoderModel&, const AutoencoderModel&) = default;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    std::uint64_t rng_seed = 42;
};

inline constexpr double kDivergenceLimit = 1e12;

inline std::vector<Layer> zero_layers(const AutoencoderShape& shape) {
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < shape.widths.size(); ++l) {
        Layer layer;
        layer.inputs = shape.widths[l];
        layer.outputs = shape.widths[l + 1];
        layer.weights.assign(layer.inputs * layer.outputs, 0.0);
        layer.biases.assign(layer.outputs, 0.0);
        layers.push_back(std::move(layer));
    }
    return layers;
}

/// Glorot-uniform weights, zero biases.
inline AutoencoderModel init(const AutoencoderShape& shape, double learning_rate,
                             std::uint64_t seed) {
    validate(shape);
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning rate must be finite and non-negative");
    AutoencoderModel m{shape, zero_layers(shape), learning_rate};
    Rng rng(seed);
    for (auto& layer : m.layers) {
        const double s = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
        for (auto& w : layer.weights) w = rng.uniform(-s, s);
    }
    return m;
}

/// Throws ModelError if parameter dimensions disagree with the shape or any value is non-finite.
inline void validate(const AutoencoderModel& m) {
    try {
        validate(m.shape);
    } catch (const ConfigError& e) {
        throw ModelError(e.what());
    }
    if (m.layers.size() != m.shape.layer_count())
        throw ModelError("autoencoder: layer count does not match shape");
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        if (layer.inputs != m.shape.widths[l] || layer.outputs != m.shape.widths[l + 1] ||
            layer.weights.size() != layer.inputs * layer.outputs ||
            layer.biases.size() != layer.outputs)
            throw ModelError("autoencoder: layer " + std::to_string(l) + " has wrong dimensions");
        for (double v : layer.weights)
            if (!std::isfinite(v)) throw ModelError("autoencoder: non-finite weight in layer " + std::to_string(l));
        for (double v : layer.biases)
            if (!std::isfinite(v)) throw ModelError("autoencoder: non-finite bias in layer " + std::to_string(l));
    }
    if (!(m.learning_rate >= 0.0) || !std::isfinite(m.learning_rate))
        throw ModelError("autoencoder: invalid learning rate");
}

namespace detail {

// activations[0] = input, activations[l + 1] = output of layer l.
inline std::vector<std::vector<double>> forward_trace(const AutoencoderModel& m,
                                                      std::span<const double> x) {
    std::vector<std::vector<double>> activations;
    activations.reserve(m.layers.size() + 1);
    activations.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        const auto& in = activations.back();
        std::vector<double> out(layer.outputs);
        const bool hidden = l + 1 < m.layers.size();
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            double s = layer.biases[o];
            for (std::size_t i = 0; i < layer.inputs; ++i) s += layer.weight(o, i) * in[i];
            out[o] = hidden ? std::tanh(s) : s;
        }
        activations.push_back(std::move(out));
    }
    return activations;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return sum;
}

inline void check_input(const AutoencoderModel& m, std::span<const double> x) {
    if (x.size() != m.shape.input_dimension())
        throw ContractError("autoencoder input has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(m.shape.input_dimension()));
}

// Adds the gradient of cost(m, x) into grad; returns the cost.
inline double accumulate_gradient(const AutoencoderModel& m, std::span<const double> x,
                                  Gradient& grad) {
    const auto act = forward_trace(m, x);
    const auto& out = act.back();
    std::vector<double> delta(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) delta[i] = 2.0 * (out[i] - x[i]);
    const double c = squared_distance(out, x);

    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const auto& layer = m.layers[l];
        const auto& in = act[l];
        auto& g = grad[l];
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            g.biases[o] += delta[o];
            for (std::size_t i = 0; i < layer.inputs; ++i) g.weights[o * layer.inputs + i] += delta[o] * in[i];
        }
        if (l == 0) break;
        // in = tanh(pre-activation), so d tanh = 1 - in^2.
        std::vector<double> next(layer.inputs, 0.0);
        for (std::size_t i = 0; i < layer.inputs; ++i) {
            double s = 0.0;
            for (std::size_t o = 0; o < layer.outputs; ++o) s += layer.weight(o, i) * delta[o];
            next[i] = s * (1.0 - in[i] * in[i]);
        }
        delta = std::move(next);
    }
    return c;
}

template <typename Rows>
double batch_gradient(const AutoencoderModel& m, const Rows& rows, Gradient& grad) {
    grad = zero_layers(m.shape);
    double total = 0.0;
    for (const auto& x : rows) total += accumulate_gradient(m, x, grad);
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (auto& g : grad) {
        for (auto& v : g.weights) v *= scale;
        for (auto& v : g.biases) v *= scale;
    }
    return total * scale;
}

}  // namespace detail

/// Reconstruction x~ of x.
inline std::vector<double> forward(const AutoencoderModel& m, std::span<const double> x) {
    detail::check_input(m, x);
    return std::move(detail::forward_trace(m, x).back());
}

/// Squared Euclidean reconstruction error ||E(x) - x||^2.
inline double cost(const AutoencoderModel& m, std::span<const double> x) {
    const auto out = forward(m, x);
    return detail::squared_distance(out, x);
}

/// Exact gradient of the mean batch cost by reverse-mode accumulation.
inline Gradient gradient(const AutoencoderModel& m, std::span<const std::vector<double>> batch) {
    if (batch.empty()) throw ContractError("gradient: empty batch");
    for (const auto& x : batch) detail::check_input(m, x);
    Gradient grad;
    detail::batch_gradient(m, batch, grad);
    return grad;
}

/// Minibatch SGD: each epoch reshuffles with the seeded generator and steps
/// p <- p - eta * grad over consecutive batches. Returns a new model.
inline AutoencoderModel train(const AutoencoderModel& initial,
                              std::span<const std::vector<double>> data,
                              const TrainConfig& cfg) {
    if (data.empty()) throw ContractError("train: empty training data");
    if (cfg.epochs == 0 || cfg.batch_size == 0)
        throw ConfigError("train: epochs and batch_size must be positive");
    for (const auto& x : data) detail::check_input(initial, x);

    AutoencoderModel m = initial;
    const std::size_t batch_size = std::min(cfg.batch_size, data.size());
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.rng_seed);

    std::vector<std::span<const double>> batch;
    Gradient grad;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.emplace_back(data[order[i]]);
            const double mean_cost = detail::batch_gradient(m, batch, grad);
            if (!std::isfinite(mean_cost) || mean_cost > kDivergenceLimit)
                throw DivergenceError("training diverged in epoch " + std::to_string(epoch));
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                auto& layer = m.layers[l];
                for (std::size_t i = 0; i < layer.weights.size(); ++i)
                    layer.weights[i] -= m.learning_rate * grad[l].weights[i];
                for (std::size_t i = 0; i < layer.biases.size(); ++i)
                    layer.biases[i] -= m.learning_rate * grad[l].biases[i];
            }
        }
    }
    for (const auto& layer : m.layers) {
        for (double v : layer.weights)
            if (!std::isfinite(v)) throw DivergenceError("training diverged in epoch " + std::to_string(cfg.epochs));
        for (double v : layer.biases)
            if (!std::isfinite(v)) throw DivergenceError("training diverged in epoch " + std::to_string(cfg.epochs));
    }
    return m;
}

}  // namespace vnfad
