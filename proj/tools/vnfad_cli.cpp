// vnfad: command-line front end for the VNF malfunction detector.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vnfad/vnfad.hpp"

namespace {

using namespace vnfad;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (auto field : text::split(value, ',')) {
        const auto v = text::parse_real(field);
        if (!v) throw ConfigError("--set " + key + ": '" + std::string(field) + "' is not a number");
        out.push_back(*v);
    }
    return out;
}

/// Parses "6-3-6:0.05,6-5-2-5-6:0.01" (widths:learning_rate, comma separated).
RosterSpec parse_roster(const std::string& value) {
    RosterSpec roster;
    for (auto item : text::split(value, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos)
            throw ConfigError("--set roster: expected widths:rate, got '" + std::string(item) + "'");
        RosterEntry entry;
        for (auto w : text::split(item.substr(0, colon), '-')) {
            const auto width = text::parse_int(w);
            if (!width || *width <= 0) throw ConfigError("--set roster: bad width '" + std::string(w) + "'");
            entry.shape.widths.push_back(static_cast<std::size_t>(*width));
        }
        const auto rate = text::parse_real(item.substr(colon + 1));
        if (!rate) throw ConfigError("--set roster: bad learning rate in '" + std::string(item) + "'");
        entry.learning_rate = *rate;
        validate(entry.shape);
        roster.entries.push_back(std::move(entry));
    }
    return roster;
}

/// Applies `--set key=value` overrides.
void apply_overrides(DetectorConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        auto real = [&] {
            const auto v = text::parse_real(value);
            if (!v) throw ConfigError("--set " + key + ": '" + value + "' is not a number");
            return *v;
        };
        auto count = [&] {
            const auto v = text::parse_int(value);
            if (!v || *v < 0) throw ConfigError("--set " + key + ": '" + value + "' is not a count");
            return static_cast<std::size_t>(*v);
        };
        if (key == "m")
            cfg.threshold.m = count();
        else if (key == "beta")
            cfg.threshold.beta = real();
        else if (key == "alpha")
            cfg.threshold.alpha = count();
        else if (key == "epochs")
            cfg.train.epochs = count();
        else if (key == "batch_size")
            cfg.train.batch_size = count();
        else if (key == "train_fraction")
            cfg.train_fraction = real();
        else if (key == "lambda")
            cfg.mix_weight = real();
        else if (key == "learning_rates") {
            cfg.learning_rates = parse_list(key, value);
            cfg.roster.reset();
        } else if (key == "roster") {
            cfg.roster = parse_roster(value);
        } else
            throw ConfigError("--set: unknown key '" + key + "'");
    }
}

std::string fmt_ratio(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

int run(int argc, char** argv) {
    CLI::App app{"vnfad - semi-supervised malfunction detection for VNF telemetry"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions global;
    app.add_option("--seed", global.seed, "Base random seed (default 42)");
    app.add_option("--set,--config", global.overrides,
                   "Configuration override key=value, repeatable; keys: m (4), beta (4.0), alpha (2), "
                   "epochs (100), batch_size (16), train_fraction (0.8), lambda (0.05), "
                   "learning_rates (0.05,0.01,0.002), roster (widths:rate list, e.g. 6-3-6:0.05,6-4-6:0.01)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate a labeled synthetic telemetry trace");
    std::string scenario = "healthy";
    ScenarioSpec spec;
    std::string sim_out;
    simulate->add_option("--scenario", scenario, "healthy | leak | cpu_spike | traffic_drop")
        ->capture_default_str();
    simulate->add_option("--duration", spec.duration_s, "Trace length in seconds")->capture_default_str();
    simulate->add_option("--period", spec.sample_period_s, "Sample period in seconds")->capture_default_str();
    simulate->add_option("--fault-start", spec.fault_start_s, "Fault onset in seconds")->capture_default_str();
    simulate->add_option("--out", sim_out, "Output CSV")->required();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit a detector model on healthy telemetry");
    std::string train_path;
    std::string model_out;
    fit_cmd->add_option("--train", train_path, "Healthy telemetry CSV")->required();
    fit_cmd->add_option("--model-out", model_out, "Model file to write")->required();

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Score telemetry against a model");
    std::string model_path;
    std::string input_path;
    std::string verdict_out;
    detect_cmd->add_option("--model", model_path, "Model file")->required();
    detect_cmd->add_option("--input", input_path, "Telemetry CSV")->required();
    detect_cmd->add_option("--out", verdict_out, "Verdict CSV to write")->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare verdicts with labeled ground truth");
    std::string verdicts_path;
    std::string truth_path;
    evaluate_cmd->add_option("--verdicts", verdicts_path, "Verdict CSV")->required();
    evaluate_cmd->add_option("--truth", truth_path, "Labeled telemetry CSV")->required();

    // feedback
    auto* feedback_cmd =
        app.add_subcommand("feedback", "Append confirmed-normal records to the training store and refit");
    std::string store_path;
    std::string records_path;
    std::string feedback_model_out;
    std::string base_model;
    feedback_cmd->add_option("--store", store_path, "Training store CSV (appended to)")->required();
    feedback_cmd->add_option("--records", records_path, "Telemetry CSV of confirmed-normal records")->required();
    feedback_cmd->add_option("--model-out", feedback_model_out, "Model file to write")->required();
    feedback_cmd->add_option("--model", base_model, "Previous model; its configuration is reused");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto make_config = [&](std::optional<DetectorConfig> base) {
        DetectorConfig cfg = base.value_or(DetectorConfig{});
        if (global.seed) cfg.train.rng_seed = *global.seed;
        apply_overrides(cfg, global.overrides);
        return cfg;
    };

    if (*simulate) {
        const auto kind = parse_scenario(scenario);
        if (!kind) {
            std::cerr << "error: unknown scenario '" << scenario << "'\n" << simulate->help();
            return kExitUsage;
        }
        spec.kind = *kind;
        spec.rng_seed = global.seed.value_or(42);
        write_csv(generate(spec), sim_out);
        return 0;
    }

    if (*fit_cmd) {
        const DetectorConfig cfg = make_config(std::nullopt);
        save(fit(read_csv(train_path), cfg), model_out);
        return 0;
    }

    if (*detect_cmd) {
        const DetectorModel model = load(model_path);
        const Dataset input = read_csv(input_path);
        if (!(input.schema == model.schema))
            throw ModelError("model schema does not match the columns of '" + input_path + "'");
        write_verdicts(detect(model, input), model.ensemble.kept.size(), verdict_out);
        return 0;
    }

    if (*evaluate_cmd) {
        const auto verdicts = read_verdicts(verdicts_path);
        const LabeledDataset truth = read_labeled_csv(truth_path);
        const Metrics m = evaluate(verdicts, truth);
        std::cout << "precision=" << fmt_ratio(m.precision) << " recall=" << fmt_ratio(m.recall)
                  << " f1=" << fmt_ratio(m.f1) << " fpr=" << fmt_ratio(m.false_positive_rate)
                  << " tp=" << m.true_positives << " fp=" << m.false_positives
                  << " tn=" << m.true_negatives << " fn=" << m.false_negatives << " latency_s="
                  << (m.latency_s ? std::to_string(*m.latency_s) : std::string("undefined")) << '\n';
        return 0;
    }

    if (*feedback_cmd) {
        std::optional<DetectorConfig> base;
        if (!base_model.empty()) base = config_of(load(base_model));
        const DetectorConfig cfg = make_config(base);
        TrainingStore store(store_path);
        const std::optional<FeatureSchema> schema =
            store.exists() ? std::optional(store.records().schema) : std::nullopt;
        const Dataset records = read_csv(records_path, schema);
        save(feedback(store, records, cfg), feedback_model_out);
        return 0;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const vnfad::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
