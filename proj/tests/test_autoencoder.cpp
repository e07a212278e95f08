#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "vnfad/autoencoder.hpp"
#include "vnfad/rng.hpp"

using namespace vnfad;

namespace {

std::vector<std::vector<double>> gaussian_rows(std::uint64_t seed, std::size_t n, std::size_t d) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& row : rows)
        for (auto& v : row) v = rng.normal();
    return rows;
}

// Rows on a one-dimensional curve, so a narrow bottleneck can learn them.
std::vector<std::vector<double>> curve_rows(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform(-1.0, 1.0);
        rows.push_back({t, 0.5 * t, -t, 0.25 * t});
    }
    return rows;
}

AutoencoderModel tiny(double w1, double w2) {
    AutoencoderModel m{{{1, 1, 1}}, zero_layers({{1, 1, 1}}), 0.1};
    m.layers[0].weights[0] = w1;
    m.layers[1].weights[0] = w2;
    return m;
}

}  // namespace

TEST_CASE("shape validation", "[autoencoder]") {
    CHECK_NOTHROW(validate(AutoencoderShape{{6, 3, 6}}));
    CHECK_THROWS_AS(validate(AutoencoderShape{{6, 6}}), ConfigError);
    CHECK_THROWS_AS(validate(AutoencoderShape{{6, 0, 6}}), ConfigError);
    CHECK_THROWS_AS(validate(AutoencoderShape{{6, 3, 5}}), ConfigError);
    CHECK(to_string(AutoencoderShape{{6, 5, 2, 5, 6}}) == "6-5-2-5-6");
}

TEST_CASE("init is deterministic and sized by the shape", "[autoencoder]") {
    const AutoencoderShape shape{{6, 5, 2, 5, 6}};
    const auto a = init(shape, 0.01, 7);
    CHECK(a == init(shape, 0.01, 7));
    CHECK_FALSE(a == init(shape, 0.01, 8));
    REQUIRE(a.layers.size() == 4);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(a.layers[l].inputs == shape.widths[l]);
        CHECK(a.layers[l].outputs == shape.widths[l + 1]);
        CHECK(a.layers[l].weights.size() == shape.widths[l] * shape.widths[l + 1]);
        CHECK(std::all_of(a.layers[l].biases.begin(), a.layers[l].biases.end(), [](double b) { return b == 0.0; }));
    }
    CHECK_NOTHROW(validate(a));
    CHECK_THROWS_AS(init(shape, -0.1, 1), ConfigError);
}

TEST_CASE("init weights are uniform on the Glorot interval", "[autoencoder]") {
    // Both layers have fan_in + fan_out = 450; 100000 weights in total.
    const auto m = init(AutoencoderShape{{200, 250, 200}}, 0.01, 11);
    const double s = std::sqrt(6.0 / 450.0);
    constexpr int kBins = 20;
    std::vector<double> counts(kBins, 0.0);
    double n = 0;
    for (const auto& layer : m.layers) {
        for (double w : layer.weights) {
            REQUIRE(std::abs(w) <= s);
            counts[std::min(kBins - 1, static_cast<int>((w + s) / (2 * s) * kBins))] += 1;
            ++n;
        }
    }
    REQUIRE(n == 100000);
    double chi2 = 0;
    for (double c : counts) chi2 += (c - n / kBins) * (c - n / kBins) / (n / kBins);
    // 99.9% point of chi-squared with 19 degrees of freedom.
    CHECK(chi2 < 43.82);
}

TEST_CASE("forward examples", "[autoencoder]") {
    const AutoencoderModel zero{{{3, 2, 3}}, zero_layers({{3, 2, 3}}), 0.1};
    CHECK(forward(zero, std::vector<double>{1, 2, 3}) == std::vector<double>{0, 0, 0});

    // Odd activation, zero biases: 0 maps to 0.
    CHECK(forward(tiny(1, 1), std::vector<double>{0.0}) == std::vector<double>{0.0});

    const auto out = forward(tiny(1, 2), std::vector<double>{0.5});
    CHECK(out[0] == Catch::Approx(2 * std::tanh(0.5)).epsilon(1e-15));
    CHECK(out[0] == Catch::Approx(0.924234).margin(1e-6));

    CHECK_THROWS_AS(forward(zero, std::vector<double>{1, 2}), ContractError);
}

TEST_CASE("cost examples", "[autoencoder]") {
    const AutoencoderModel zero{{{2, 1, 2}}, zero_layers({{2, 1, 2}}), 0.1};
    CHECK(cost(zero, std::vector<double>{1, 2}) == 5.0);
    CHECK(cost(tiny(1, 2), std::vector<double>{0.5}) ==
          Catch::Approx((2 * std::tanh(0.5) - 0.5) * (2 * std::tanh(0.5) - 0.5)));
}

TEST_CASE("cost is non-negative and invariant to joint permutation of output units", "[autoencoder][property]") {
    Rng rng(4);
    const auto m = init(AutoencoderShape{{4, 3, 4}}, 0.1, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.normal(0, 3);
        const double c = cost(m, x);
        CHECK(c >= 0.0);

        // Permuting the output units together with the input coordinates
        // leaves ||x~ - x|| unchanged.
        std::vector<std::size_t> perm{0, 1, 2, 3};
        rng.shuffle(std::span<std::size_t>(perm));
        AutoencoderModel p = m;
        auto& first = p.layers[0];
        auto& last = p.layers[1];
        for (std::size_t h = 0; h < 3; ++h)
            for (std::size_t i = 0; i < 4; ++i) first.weight(h, perm[i]) = m.layers[0].weight(h, i);
        for (std::size_t o = 0; o < 4; ++o) {
            for (std::size_t h = 0; h < 3; ++h) last.weight(perm[o], h) = m.layers[1].weight(o, h);
            last.biases[perm[o]] = m.layers[1].biases[o];
        }
        std::vector<double> px(4);
        for (std::size_t i = 0; i < 4; ++i) px[perm[i]] = x[i];
        CHECK(cost(p, px) == Catch::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("gradient matches central finite differences", "[autoencoder]") {
    for (const AutoencoderShape& shape : {AutoencoderShape{{6, 3, 6}}, AutoencoderShape{{6, 5, 2, 5, 6}}}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto m = init(shape, 0.01, seed);
            Rng rng(seed + 100);
            for (auto& layer : m.layers)
                for (auto& b : layer.biases) b = rng.normal(0, 0.3);
            const auto batch = gaussian_rows(seed, 8, 6);
            const auto analytic = gradient(m, batch);
            const auto numeric = oracle::finite_difference_gradient(m, batch, 1e-5);
            CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);
        }
    }
}

TEST_CASE("gradient of a zero network", "[autoencoder]") {
    // All activations are zero, so only the output bias sees a gradient: 2 (0 - x) averaged.
    const AutoencoderModel zero{{{2, 2, 2}}, zero_layers({{2, 2, 2}}), 0.1};
    const std::vector<std::vector<double>> batch{{1, 2}, {3, -2}};
    const auto g = gradient(zero, batch);
    for (double w : g[0].weights) CHECK(w == 0.0);
    for (double b : g[0].biases) CHECK(b == 0.0);
    for (double w : g[1].weights) CHECK(w == 0.0);
    CHECK(g[1].biases == std::vector<double>{-4.0, 0.0});
}

TEST_CASE("zero input with zero biases gives no output-weight gradient", "[autoencoder]") {
    // Hidden activations are tanh(0) = 0, so nothing flows into the last weights.
    const auto m = init(AutoencoderShape{{4, 3, 4}}, 0.1, 12);
    const auto g = gradient(m, std::vector<std::vector<double>>{{0, 0, 0, 0}});
    for (double w : g.back().weights) CHECK(w == 0.0);
}

TEST_CASE("gradient of a duplicated batch equals the single-row gradient", "[autoencoder]") {
    const auto m = init(AutoencoderShape{{3, 2, 3}}, 0.1, 9);
    const std::vector<std::vector<double>> one{{0.3, -1.2, 2.0}};
    const std::vector<std::vector<double>> twice{one[0], one[0]};
    const auto a = gradient(m, one);
    const auto b = gradient(m, twice);
    CHECK(oracle::max_relative_error(b, a, 1e-12) < 1e-14);
    CHECK_THROWS_AS(gradient(m, std::vector<std::vector<double>>{}), ContractError);
}

TEST_CASE("training with zero learning rate leaves the model unchanged", "[autoencoder]") {
    const auto m = init(AutoencoderShape{{4, 2, 4}}, 0.0, 3);
    CHECK(train(m, curve_rows(1, 50), TrainConfig{5, 8, 1}) == m);
}

TEST_CASE("training reduces reconstruction cost", "[autoencoder]") {
    const auto rows = curve_rows(2, 200);
    const auto m = init(AutoencoderShape{{4, 2, 4}}, 0.05, 4);
    const auto trained = train(m, rows, TrainConfig{50, 16, 5});
    const double before = oracle::mean_batch_cost(m, rows);
    const double after = oracle::mean_batch_cost(trained, rows);
    CHECK(after < 0.1 * before);
}

TEST_CASE("training is deterministic and does not mutate its inputs", "[autoencoder]") {
    const auto rows = curve_rows(3, 120);
    const auto rows_copy = rows;
    const auto m = init(AutoencoderShape{{4, 3, 4}}, 0.01, 6);
    const auto m_copy = m;
    const auto a = train(m, rows, TrainConfig{10, 16, 77});
    const auto b = train(m, rows, TrainConfig{10, 16, 77});
    CHECK(a == b);
    CHECK_FALSE(a == train(m, rows, TrainConfig{10, 16, 78}));
    CHECK(rows == rows_copy);
    CHECK(m == m_copy);
}

TEST_CASE("batch size larger than the data is clamped", "[autoencoder]") {
    const auto rows = curve_rows(5, 10);
    const auto m = init(AutoencoderShape{{4, 2, 4}}, 0.01, 6);
    CHECK(train(m, rows, TrainConfig{3, 1000, 1}) == train(m, rows, TrainConfig{3, 10, 1}));
}

TEST_CASE("training reports divergence", "[autoencoder]") {
    auto rows = gaussian_rows(8, 64, 6);
    for (auto& row : rows)
        for (auto& v : row) v *= 100;
    const auto m = init(AutoencoderShape{{6, 3, 6}}, 10.0, 1);
    CHECK_THROWS_AS(train(m, rows, TrainConfig{20, 16, 1}), DivergenceError);
    CHECK_THROWS_WITH(train(m, rows, TrainConfig{20, 16, 1}), Catch::Matchers::ContainsSubstring("diverged in epoch"));
}

TEST_CASE("train rejects bad arguments", "[autoencoder]") {
    const auto m = init(AutoencoderShape{{4, 2, 4}}, 0.01, 6);
    CHECK_THROWS_AS(train(m, std::vector<std::vector<double>>{}, TrainConfig{}), ContractError);
    CHECK_THROWS_AS(train(m, curve_rows(1, 5), TrainConfig{0, 16, 1}), ConfigError);
    CHECK_THROWS_AS(train(m, curve_rows(1, 5), TrainConfig{1, 0, 1}), ConfigError);
    CHECK_THROWS_AS(train(m, gaussian_rows(1, 5, 3), TrainConfig{}), ContractError);
}

TEST_CASE("validate rejects corrupt models", "[autoencoder]") {
    auto m = init(AutoencoderShape{{4, 2, 4}}, 0.01, 6);
    auto bad = m;
    bad.layers[1].weights.pop_back();
    CHECK_THROWS_AS(validate(bad), ModelError);
    bad = m;
    bad.layers[0].biases[0] = std::nan("");
    CHECK_THROWS_AS(validate(bad), ModelError);
    bad = m;
    bad.shape.widths = {4, 4};
    CHECK_THROWS_AS(validate(bad), ModelError);
}
