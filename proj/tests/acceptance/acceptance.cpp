// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "../test_support.hpp"
#include "vnfad/vnfad.hpp"

using namespace vnfad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Dataset healthy_trace(std::uint64_t seed, std::int64_t duration) {
    return generate({ScenarioKind::healthy, duration, 10, 0, seed}).data;
}

// Healthy behaviour at 2.5x the usual network traffic: benign but unseen in training.
Dataset busy_trace(std::uint64_t seed) {
    Dataset d = healthy_trace(seed, 1800);
    for (auto& r : d.records) {
        r.values[4] *= 2.5;
        r.values[5] *= 2.5;
    }
    return d;
}

double anomaly_rate(const std::vector<TimedVerdict>& verdicts) {
    std::size_t n = 0;
    for (const auto& v : verdicts) n += v.verdict.anomaly;
    return static_cast<double>(n) / static_cast<double>(verdicts.size());
}

struct LeakScore {
    double recall_high = 0;  // recall on fault records at or above 80% memory
    std::size_t high_records = 0;
    std::optional<std::int64_t> latency;
};

LeakScore leak_score(const std::vector<TimedVerdict>& verdicts, const LabeledDataset& truth) {
    LeakScore s;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        if (truth.labels[i] != Label::fault || truth.data.records[i].values[1] < 0.8 * kGiB) continue;
        ++s.high_records;
        hits += verdicts[i].verdict.anomaly;
    }
    s.recall_high = s.high_records ? static_cast<double>(hits) / static_cast<double>(s.high_records) : 0.0;
    s.latency = evaluate(verdicts, truth).latency_s;
    return s;
}

Outcome gaussianization() {
    Rng rng(2000);
    std::vector<double> sample(2000);
    for (auto& x : sample) x = rng.exponential(1.0);
    const auto start = Clock::now();
    const auto fn = fit_feature(sample);
    std::vector<double> z;
    z.reserve(sample.size());
    for (double x : sample) z.push_back(transform_value(fn, x));
    const double elapsed = seconds_since(start);
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    double ss = 0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(z.size() - 1));
    const double ks = oracle::ks_to_standard_normal(z);
    return {std::abs(mean) <= 0.05 && std::abs(sd - 1) <= 0.05 && ks <= 0.03 && elapsed < 1.0,
            fmt("mean=%.4f sd=%.4f ks=%.4f time=%.3fs", mean, sd, ks, elapsed)};
}

Outcome monotonicity() {
    std::vector<std::vector<double>> columns;
    Rng rng(77);
    std::vector<double> exp_col(2000);
    for (auto& x : exp_col) x = rng.exponential(1.0);
    columns.push_back(exp_col);
    const Dataset trace = healthy_trace(1, 7200);
    for (std::size_t k = 0; k < trace.schema.dimension(); ++k) columns.push_back(trace.column(k));

    std::size_t pairs = 0;
    std::size_t violations = 0;
    std::size_t out_of_range = 0;
    for (const auto& column : columns) {
        const auto fn = fit_feature(column);
        const double lo = fn.knot_values.front() - 10 * fn.stddev;
        const double hi = fn.knot_values.back() + 10 * fn.stddev;
        for (int i = 0; i < 10000; ++i) {
            double x = rng.uniform(lo, hi);
            double y = rng.uniform(lo, hi);
            if (x == y) continue;
            if (x > y) std::swap(x, y);
            ++pairs;
            const double fx = cdf(fn, x);
            const double fy = cdf(fn, y);
            if (!(fx < fy)) ++violations;
            for (double f : {fx, fy})
                if (!(f > 0.0 && f < 1.0)) ++out_of_range;
        }
        for (double x : {lo, hi, fn.knot_values.front(), fn.knot_values.back()}) {
            const double f = cdf(fn, x);
            if (!(f > 0.0 && f < 1.0)) ++out_of_range;
        }
    }
    return {violations == 0 && out_of_range == 0,
            fmt("%zu features, %zu pairs, %zu order violations, %zu values outside (0,1)", columns.size(), pairs,
                violations, out_of_range)};
}

Outcome quantile_accuracy() {
    double worst = 0;
    std::vector<double> grid;
    for (int e = -12; e <= -1; ++e)
        for (double m : {1.0, 2.0, 5.0}) grid.push_back(m * std::pow(10.0, e));
    for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);
    const std::size_t low = grid.size();
    for (std::size_t i = 0; i < low; ++i) grid.push_back(1.0 - grid[i]);
    for (double p : grid) worst = std::max(worst, std::abs(normal_quantile(p) - oracle::normal_quantile(p)));

    double round_trip = 0;
    for (int i = -6000; i <= 6000; ++i) {
        const double z = i / 1000.0;
        round_trip = std::max(round_trip, std::abs(normal_quantile(normal_cdf(z)) - z));
    }
    return {worst <= 1e-9 && round_trip <= 1e-8,
            fmt("%zu grid points, max |err|=%.2e; round trip on [-6,6] max |err|=%.2e", grid.size(), worst, round_trip)};
}

Outcome gradient_correctness() {
    Rng rng(4);
    double worst = 0;
    std::string shapes;
    for (int n = 0; n < 10; ++n) {
        const std::size_t d = 2 + rng.below(7);
        const auto roster = default_roster(d);
        const auto& entry = roster.entries[rng.below(roster.size())];
        auto m = init(entry.shape, entry.learning_rate, 1000 + n);
        for (auto& layer : m.layers)
            for (auto& b : layer.biases) b = rng.normal(0, 0.3);
        std::vector<std::vector<double>> batch(8, std::vector<double>(d));
        for (auto& row : batch)
            for (auto& v : row) v = rng.normal();
        const auto analytic = gradient(m, batch);
        const auto numeric = oracle::finite_difference_gradient(m, batch, 1e-5);
        worst = std::max(worst, oracle::max_relative_error(analytic, numeric, 1e-8));
        if (n) shapes += ' ';
        shapes += to_string(entry.shape);
    }
    return {worst < 1e-4, fmt("max relative error %.2e over shapes %s", worst, shapes.c_str())};
}

Outcome truth_table() {
    std::size_t cases = 0;
    std::size_t wrong = 0;
    // Exactly representable products: cost == beta * mu holds in binary64.
    for (double mu : {0.25, 0.75, 1.5, 3.0}) {
        for (double beta : {2.0, 4.0, 8.0}) {
            const ThresholdConfig tc{1, beta, 0};
            const double at = beta * mu;
            const std::vector<double> base{mu};
            ++cases;
            if (decide(std::vector<double>{at}, base, tc).suspicious_count != 0) ++wrong;
            ++cases;
            if (decide(std::vector<double>{std::nextafter(at, INFINITY)}, base, tc).suspicious_count != 1) ++wrong;
        }
    }
    for (std::size_t m = 1; m <= 6; ++m) {
        for (std::size_t alpha = 0; alpha < m; ++alpha) {
            const ThresholdConfig tc{m, 4.0, alpha};
            const std::vector<double> base(m, 1.0);
            for (std::size_t count = 0; count <= m; ++count) {
                std::vector<double> costs(m, 4.0);
                for (std::size_t l = 0; l < count; ++l) costs[l] = 4.5;
                const auto v = decide(costs, base, tc);
                ++cases;
                if (v.suspicious_count != count || v.anomaly != (count >= alpha + 1)) ++wrong;
            }
        }
    }
    return {wrong == 0, fmt("%zu cases, %zu wrong", cases, wrong)};
}

// Minimal-sum m-subset by enumeration; ties broken toward the lexicographically
// smallest index set.
std::vector<std::size_t> brute_force_best(const std::vector<double>& mu, std::size_t m) {
    const std::size_t n = mu.size();
    std::vector<std::size_t> best;
    double best_sum = INFINITY;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        std::vector<std::size_t> subset;
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                subset.push_back(i);
                sum += mu[i];
            }
        if (sum < best_sum || (sum == best_sum && subset < best)) {
            best_sum = sum;
            best = subset;
        }
    }
    return best;
}

Outcome selection_oracle() {
    Rng rng(6);
    std::size_t cases = 0;
    std::size_t ties = 0;
    std::size_t wrong = 0;
    for (int trial = 0; trial < 5000; ++trial) {
        const std::size_t n = 1 + rng.below(6);
        const std::size_t m = 1 + rng.below(n);
        std::vector<double> mu(n);
        const bool coarse = trial % 2 == 0;
        // Coarse dyadic values give frequent ties with exact sums.
        for (auto& v : mu) v = coarse ? 0.125 * static_cast<double>(1 + rng.below(4)) : rng.exponential(1.0);
        std::vector<double> sorted = mu;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) ++ties;
        auto kept = select_best(mu, m);
        std::sort(kept.begin(), kept.end());
        ++cases;
        if (kept != brute_force_best(mu, m)) ++wrong;
    }

    // The same through a real fit: kept roster indices against the brute force
    // over every entry's validation cost.
    const Dataset trace = healthy_trace(8, 3600);
    const auto [train_part, val_part] = chrono_split(trace, 0.8);
    const auto nz = fit_normalizer(train_part);
    const auto train_rows = transform(nz, train_part);
    const auto val_rows = transform(nz, val_part);
    const auto roster = default_roster(6);
    const TrainConfig cfg{20, 16, 42};
    const auto em = fit_ensemble(roster, train_rows, val_rows, cfg, ThresholdConfig{});
    std::vector<double> mu;
    for (std::size_t l = 0; l < roster.size(); ++l) {
        TrainConfig solo = cfg;
        solo.rng_seed = (cfg.rng_seed + l) ^ kShuffleSalt;
        const auto& e = roster.entries[l];
        const auto model = train(init(e.shape, e.learning_rate, cfg.rng_seed + l), train_rows, solo);
        mu.push_back(std::max(mean_cost(model, val_rows), kValidationCostFloor));
    }
    std::vector<std::size_t> kept_idx;
    for (const auto& k : em.kept) kept_idx.push_back(k.roster_index);
    std::sort(kept_idx.begin(), kept_idx.end());
    const bool fitted_ok = kept_idx == brute_force_best(mu, em.kept.size());
    return {wrong == 0 && fitted_ok,
            fmt("%zu random rosters (%zu with ties), %zu mismatches; fitted roster %s", cases, ties, wrong,
                fitted_ok ? "matches" : "differs")};
}

Outcome leak_detection() {
    const auto start = Clock::now();
    const auto model = fit(healthy_trace(1, 7200), DetectorConfig{});
    const auto leak = generate({ScenarioKind::leak, 1800, 10, 600, 2});
    const auto s = leak_score(detect(model, leak.data), leak);
    const double fpr = anomaly_rate(detect(model, healthy_trace(3, 1800)));
    const double elapsed = seconds_since(start);
    const bool ok = s.high_records > 0 && s.recall_high >= 0.9 && fpr <= 0.05 && s.latency && *s.latency <= 180 &&
                    elapsed <= 120.0;
    return {ok, fmt("recall(mem>=80%%)=%.3f over %zu records, healthy FPR=%.3f, latency=%s, time=%.2fs",
                    s.recall_high, s.high_records, fpr,
                    s.latency ? (std::to_string(*s.latency) + "s").c_str() : "none", elapsed)};
}

Outcome determinism() {
    TempDir dir;
    const auto train_csv = dir.file("train.csv");
    write_csv(healthy_trace(1, 7200), train_csv);
    const auto a = dir.file("a.json");
    const auto b = dir.file("b.json");
    const int ra = run_cli(dir, "fit --train '" + train_csv + "' --model-out '" + a + "'").status;
    const int rb = run_cli(dir, "fit --train '" + train_csv + "' --model-out '" + b + "'").status;
    const std::string bytes = read_text(a);
    const bool identical = ra == 0 && rb == 0 && !bytes.empty() && bytes == read_text(b);

    const auto model = load(a);
    const auto resaved = dir.file("c.json");
    save(model, resaved);
    const auto reloaded = load(resaved);
    Rng rng(1000);
    const Dataset reference = healthy_trace(1, 7200);
    Dataset random_records{model.schema, {}};
    for (std::int64_t i = 0; i < 1000; ++i) {
        MetricRecord r{i, {}};
        // Anywhere from zero to three times a typical healthy reading.
        const auto& typical = reference.records[rng.below(reference.size())].values;
        for (double v : typical) r.values.push_back(v * rng.uniform(0.0, 3.0));
        random_records.records.push_back(std::move(r));
    }
    const auto va = detect(model, random_records);
    const auto vb = detect(reloaded, random_records);
    const bool same_verdicts = va == vb;
    return {identical && same_verdicts && serialize(reloaded) == bytes,
            fmt("fit twice: %s (%zu bytes); reloaded verdicts on 1000 random records: %s",
                identical ? "byte-identical" : "different", bytes.size(), same_verdicts ? "identical" : "different")};
}

Outcome feedback_loop() {
    TempDir dir;
    const auto store = dir.file("store.csv");
    const auto model0 = dir.file("model0.json");
    const auto model1 = dir.file("model1.json");
    const auto busy_csv = dir.file("busy.csv");
    const auto verdicts_csv = dir.file("verdicts.csv");
    const auto confirmed_csv = dir.file("confirmed.csv");

    write_csv(healthy_trace(1, 7200), store);
    if (run_cli(dir, "fit --train '" + store + "' --model-out '" + model0 + "'").status != 0)
        return {false, "initial fit failed"};

    const Dataset busy = busy_trace(11);
    write_csv(busy, busy_csv);
    if (run_cli(dir, "detect --model '" + model0 + "' --input '" + busy_csv + "' --out '" + verdicts_csv + "'")
            .status != 0)
        return {false, "detect failed"};
    const auto verdicts = read_verdicts(verdicts_csv);
    const double before = anomaly_rate(verdicts);

    // The operator confirms every flagged record in the region as normal.
    Dataset confirmed{busy.schema, {}};
    for (std::size_t i = 0; i < verdicts.size(); ++i)
        if (verdicts[i].verdict.anomaly) confirmed.records.push_back(busy.records[i]);
    write_csv(confirmed, confirmed_csv);
    if (run_cli(dir, "feedback --store '" + store + "' --records '" + confirmed_csv + "' --model '" + model0 +
                         "' --model-out '" + model1 + "'")
            .status != 0)
        return {false, "feedback failed"};

    const auto refit = load(model1);
    const double after = anomaly_rate(detect(refit, busy));
    const double fresh = anomaly_rate(detect(refit, busy_trace(12)));
    const auto leak = generate({ScenarioKind::leak, 1800, 10, 600, 2});
    const auto s = leak_score(detect(refit, leak.data), leak);
    const bool ok = before > 0.05 && after <= 0.05 && s.recall_high >= 0.9;
    return {ok, fmt("novel-region anomaly rate %.3f -> %.3f after confirming %zu records (fresh region %.3f); "
                    "leak recall(mem>=80%%)=%.3f",
                    before, after, confirmed.size(), fresh, s.recall_high)};
}

}  // namespace

int main() {
    const auto start = Clock::now();
    report(1, "gaussianization", gaussianization);
    report(2, "strict monotonicity and range", monotonicity);
    report(3, "quantile accuracy", quantile_accuracy);
    report(4, "gradient correctness", gradient_correctness);
    report(5, "thresholding truth table", truth_table);
    report(6, "selection oracle", selection_oracle);
    report(7, "end-to-end leak detection", leak_detection);
    report(8, "determinism and persistence", determinism);
    report(9, "feedback loop", feedback_loop);
    std::printf("%d of 9 criteria failed (%.2fs)\n", failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}
