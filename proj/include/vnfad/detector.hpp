#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnfad/autoencoder.hpp"
#include "vnfad/ensemble.hpp"
#include "vnfad/error.hpp"
#include "vnfad/gaussianizer.hpp"
#include "vnfad/telemetry.hpp"
#include "vnfad/text.hpp"

namespace vnfad {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::size_t kMinTrainingRecords = 50;

/// Everything needed to (re)fit a detector from data.
struct DetectorConfig {
    TrainConfig train;
    ThresholdConfig threshold;
    double train_fraction = 0.8;
    double mix_weight = kDefaultMixWeight;
    std::vector<double> learning_rates = default_learning_rates();
    /// Explicit roster; when empty the default roster for the data dimension is used.
    std::optional<RosterSpec> roster;
};

struct ModelMetadata {
    int format_version = kModelFormatVersion;
    std::uint64_t base_seed = 0;
    RosterSpec roster;
    double train_fraction = 0.8;
    std::int64_t fit_timestamp = 0;  ///< timestamp of the newest training record
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double mix_weight = kDefaultMixWeight;

    friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// Fitted healthy-operation profile: normalizer plus thresholded ensemble.
struct DetectorModel {
    FeatureSchema schema;
    Normalizer normalizer;
    EnsembleModel ensemble;
    ModelMetadata metadata;

    friend bool operator==(const DetectorModel&, const DetectorModel&) = default;
};

/// Configuration that reproduces `model` when fitted on the same data.
inline DetectorConfig config_of(const DetectorModel& model) {
    DetectorConfig cfg;
    cfg.train = {model.metadata.epochs, model.metadata.batch_size, model.metadata.base_seed};
    cfg.threshold = model.ensemble.config;
    cfg.train_fraction = model.metadata.train_fraction;
    cfg.mix_weight = model.metadata.mix_weight;
    cfg.roster = model.metadata.roster;
    return cfg;
}

/// Fits from one or more chronological segments. Each segment of two or more
/// records is split chronologically on its own; single-record segments go to
/// training. The normalizer only sees the training portions.
inline DetectorModel fit(std::span<const Dataset> segments, const DetectorConfig& cfg) {
    if (segments.empty()) throw DataError("insufficient training data: no records");
    const FeatureSchema& schema = segments.front().schema;
    std::size_t total = 0;
    for (const auto& seg : segments) {
        if (!(seg.schema == schema)) throw ContractError("fit: segments disagree on schema");
        total += seg.size();
    }
    if (total < kMinTrainingRecords)
        throw DataError("insufficient training data: " + std::to_string(total) +
                        " records, need at least " + std::to_string(kMinTrainingRecords));

    Dataset train{schema, {}};
    Dataset validation{schema, {}};
    std::int64_t newest = std::numeric_limits<std::int64_t>::min();
    for (const auto& seg : segments) {
        if (seg.empty()) continue;
        for (const auto& rec : seg.records) {
            check_record(schema, rec);
            newest = std::max(newest, rec.timestamp);
        }
        if (seg.size() == 1) {
            train.records.push_back(seg.records.front());
            continue;
        }
        auto [t, v] = chrono_split(seg, cfg.train_fraction);
        train.records.insert(train.records.end(), t.records.begin(), t.records.end());
        validation.records.insert(validation.records.end(), v.records.begin(), v.records.end());
    }

    DetectorModel model;
    model.schema = schema;
    model.normalizer = fit_normalizer(train, cfg.mix_weight);
    const auto train_rows = transform(model.normalizer, train);
    const auto validation_rows = transform(model.normalizer, validation);
    const RosterSpec roster =
        cfg.roster ? *cfg.roster : default_roster(schema.dimension(), cfg.learning_rates);
    for (const auto& entry : roster.entries)
        if (entry.shape.input_dimension() != schema.dimension())
            throw ConfigError("fit: roster shape " + to_string(entry.shape) +
                              " does not match data dimension");
    model.ensemble = fit_ensemble(roster, train_rows, validation_rows, cfg.train, cfg.threshold);

    model.metadata.base_seed = cfg.train.rng_seed;
    model.metadata.roster = roster;
    model.metadata.train_fraction = cfg.train_fraction;
    model.metadata.fit_timestamp = newest;
    model.metadata.epochs = cfg.train.epochs;
    model.metadata.batch_size = cfg.train.batch_size;
    model.metadata.mix_weight = cfg.mix_weight;
    return model;
}

inline DetectorModel fit(const Dataset& data, const DetectorConfig& cfg) {
    return fit(std::span<const Dataset>(&data, 1), cfg);
}

/// Normalizes one record and scores it against the ensemble.
inline Verdict detect(const DetectorModel& model, const MetricRecord& rec) {
    return score(model.ensemble, transform(model.normalizer, rec));
}

inline std::vector<TimedVerdict> detect(const DetectorModel& model, const Dataset& data) {
    if (!(data.schema == model.schema))
        throw ContractError("detect: input schema does not match the model schema");
    std::vector<TimedVerdict> out;
    out.reserve(data.size());
    for (const auto& rec : data.records) out.push_back({rec.timestamp, detect(model, rec)});
    return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace detail {

using nlohmann::json;

class JsonReader {
public:
    static void expect_keys(const json& obj, const std::string& path,
                            std::initializer_list<const char*> keys) {
        if (!obj.is_object()) fail(path, "expected an object");
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, _] : obj.items())
            if (!allowed.count(key)) fail(path, "unknown field '" + key + "'");
        for (const auto* key : keys)
            if (!obj.contains(key)) fail(path, "missing field '" + std::string(key) + "'");
    }

    static double real(const json& v, const std::string& path) {
        if (!v.is_number()) fail(path, "expected a finite number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(path, "non-finite value");
        return x;
    }

    static std::uint64_t unsigned_int(const json& v, const std::string& path) {
        if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    static std::int64_t integer(const json& v, const std::string& path) {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        return v.get<std::int64_t>();
    }

    static std::vector<double> reals(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array");
        std::vector<double> out;
        out.reserve(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(real(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    static const json& array(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array");
        return v;
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ModelError("model error at " + path + ": " + what);
    }
};

inline json shape_json(const AutoencoderShape& shape) { return json(shape.widths); }

inline AutoencoderShape read_shape(const json& v, const std::string& path) {
    AutoencoderShape shape;
    for (std::size_t i = 0; i < JsonReader::array(v, path).size(); ++i)
        shape.widths.push_back(JsonReader::unsigned_int(v[i], path + "[" + std::to_string(i) + "]"));
    try {
        validate(shape);
    } catch (const ConfigError& e) {
        JsonReader::fail(path, e.what());
    }
    return shape;
}

inline json to_json(const DetectorModel& model) {
    json j;
    j["format_version"] = model.metadata.format_version;
    j["schema"] = model.schema.names();

    json normalizer = json::array();
    for (const auto& fn : model.normalizer.per_feature) {
        normalizer.push_back({{"knot_values", fn.knot_values},
                              {"knot_probs", fn.knot_probs},
                              {"mean", fn.mean},
                              {"stddev", fn.stddev},
                              {"mix_weight", fn.mix_weight}});
    }
    j["normalizer"] = normalizer;

    json encoders = json::array();
    for (const auto& e : model.ensemble.kept) {
        json layers = json::array();
        for (const auto& layer : e.model.layers)
            layers.push_back({{"weights", layer.weights}, {"biases", layer.biases}});
        encoders.push_back({{"roster_index", e.roster_index},
                            {"shape", shape_json(e.model.shape)},
                            {"learning_rate", e.model.learning_rate},
                            {"validation_cost", e.validation_cost},
                            {"layers", layers}});
    }
    j["ensemble"] = encoders;

    const auto& tc = model.ensemble.config;
    j["threshold"] = {{"m", tc.m}, {"beta", tc.beta}, {"alpha", tc.alpha}};

    json roster = json::array();
    for (const auto& entry : model.metadata.roster.entries)
        roster.push_back({{"shape", shape_json(entry.shape)}, {"learning_rate", entry.learning_rate}});
    const auto& md = model.metadata;
    j["metadata"] = {{"base_seed", md.base_seed},     {"roster", roster},
                     {"train_fraction", md.train_fraction}, {"fit_timestamp", md.fit_timestamp},
                     {"epochs", md.epochs},           {"batch_size", md.batch_size},
                     {"mix_weight", md.mix_weight}};
    return j;
}

inline DetectorModel from_json(const json& j) {
    using R = JsonReader;
    if (!j.is_object()) R::fail("$", "expected an object");
    if (!j.contains("format_version")) R::fail("$", "missing field 'format_version'");
    const auto version = R::integer(j["format_version"], "format_version");
    if (version != kModelFormatVersion)
        throw ModelError("unsupported version " + std::to_string(version) + " (expected " +
                         std::to_string(kModelFormatVersion) + ")");
    R::expect_keys(j, "$", {"format_version", "schema", "normalizer", "ensemble", "threshold", "metadata"});

    DetectorModel model;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < R::array(j["schema"], "schema").size(); ++i) {
        const auto& v = j["schema"][i];
        if (!v.is_string()) R::fail("schema[" + std::to_string(i) + "]", "expected a string");
        names.push_back(v.get<std::string>());
    }
    try {
        model.schema = FeatureSchema(names);
    } catch (const DataError& e) {
        R::fail("schema", e.what());
    }
    const std::size_t d = model.schema.dimension();

    const auto& normalizer = R::array(j["normalizer"], "normalizer");
    if (normalizer.size() != d) R::fail("normalizer", "expected one entry per schema feature");
    model.normalizer.schema = model.schema;
    for (std::size_t k = 0; k < d; ++k) {
        const std::string path = "normalizer[" + std::to_string(k) + "]";
        const auto& f = normalizer[k];
        R::expect_keys(f, path, {"knot_values", "knot_probs", "mean", "stddev", "mix_weight"});
        FeatureNormalizer fn;
        fn.knot_values = R::reals(f["knot_values"], path + ".knot_values");
        fn.knot_probs = R::reals(f["knot_probs"], path + ".knot_probs");
        fn.mean = R::real(f["mean"], path + ".mean");
        fn.stddev = R::real(f["stddev"], path + ".stddev");
        fn.mix_weight = R::real(f["mix_weight"], path + ".mix_weight");
        try {
            validate(fn);
        } catch (const ModelError& e) {
            R::fail(path, e.what());
        }
        model.normalizer.per_feature.push_back(std::move(fn));
    }

    R::expect_keys(j["threshold"], "threshold", {"m", "beta", "alpha"});
    auto& tc = model.ensemble.config;
    tc.m = R::unsigned_int(j["threshold"]["m"], "threshold.m");
    tc.beta = R::real(j["threshold"]["beta"], "threshold.beta");
    tc.alpha = R::unsigned_int(j["threshold"]["alpha"], "threshold.alpha");

    const auto& encoders = R::array(j["ensemble"], "ensemble");
    if (encoders.size() != tc.m) R::fail("ensemble", "expected threshold.m encoders");
    for (std::size_t l = 0; l < encoders.size(); ++l) {
        const std::string path = "ensemble[" + std::to_string(l) + "]";
        const auto& e = encoders[l];
        R::expect_keys(e, path, {"roster_index", "shape", "learning_rate", "validation_cost", "layers"});
        KeptEncoder kept;
        kept.roster_index = R::unsigned_int(e["roster_index"], path + ".roster_index");
        kept.model.shape = read_shape(e["shape"], path + ".shape");
        if (kept.model.shape.input_dimension() != d) R::fail(path + ".shape", "input width differs from schema");
        kept.model.learning_rate = R::real(e["learning_rate"], path + ".learning_rate");
        kept.validation_cost = R::real(e["validation_cost"], path + ".validation_cost");
        if (!(kept.validation_cost >= kValidationCostFloor))
            R::fail(path + ".validation_cost", "below the validation cost floor");
        const auto& layers = R::array(e["layers"], path + ".layers");
        if (layers.size() != kept.model.shape.layer_count())
            R::fail(path + ".layers", "layer count does not match shape");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string lpath = path + ".layers[" + std::to_string(i) + "]";
            R::expect_keys(layers[i], lpath, {"weights", "biases"});
            Layer layer;
            layer.inputs = kept.model.shape.widths[i];
            layer.outputs = kept.model.shape.widths[i + 1];
            layer.weights = R::reals(layers[i]["weights"], lpath + ".weights");
            layer.biases = R::reals(layers[i]["biases"], lpath + ".biases");
            if (layer.weights.size() != layer.inputs * layer.outputs)
                R::fail(lpath + ".weights", "size does not match shape");
            if (layer.biases.size() != layer.outputs) R::fail(lpath + ".biases", "size does not match shape");
            kept.model.layers.push_back(std::move(layer));
        }
        try {
            validate(kept.model);
        } catch (const ModelError& err) {
            R::fail(path, err.what());
        }
        model.ensemble.kept.push_back(std::move(kept));
    }

    const auto& md = j["metadata"];
    R::expect_keys(md, "metadata",
                   {"base_seed", "roster", "train_fraction", "fit_timestamp", "epochs", "batch_size", "mix_weight"});
    auto& meta = model.metadata;
    meta.format_version = static_cast<int>(version);
    meta.base_seed = R::unsigned_int(md["base_seed"], "metadata.base_seed");
    const auto& roster = R::array(md["roster"], "metadata.roster");
    for (std::size_t i = 0; i < roster.size(); ++i) {
        const std::string path = "metadata.roster[" + std::to_string(i) + "]";
        R::expect_keys(roster[i], path, {"shape", "learning_rate"});
        meta.roster.entries.push_back(
            {read_shape(roster[i]["shape"], path + ".shape"),
             R::real(roster[i]["learning_rate"], path + ".learning_rate")});
    }
    meta.train_fraction = R::real(md["train_fraction"], "metadata.train_fraction");
    meta.fit_timestamp = R::integer(md["fit_timestamp"], "metadata.fit_timestamp");
    meta.epochs = R::unsigned_int(md["epochs"], "metadata.epochs");
    meta.batch_size = R::unsigned_int(md["batch_size"], "metadata.batch_size");
    meta.mix_weight = R::real(md["mix_weight"], "metadata.mix_weight");

    try {
        validate(tc, std::max(meta.roster.size(), tc.m));
    } catch (const ConfigError& e) {
        R::fail("threshold", e.what());
    }
    return model;
}

}  // namespace detail

inline std::string serialize(const DetectorModel& model) { return detail::to_json(model).dump(2) + "\n"; }

inline DetectorModel deserialize(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("model parse error: ") + e.what());
    }
    return detail::from_json(j);
}

/// Writes the model through a temporary file and renames it into place.
inline void save(const DetectorModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << serialize(model);
        out.flush();
        if (!out) throw IoError("write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move model into '" + path + "': " + ec.message());
}

inline DetectorModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize(buffer.str());
}

// ---------------------------------------------------------------------------
// Verdict CSV

inline void write_verdicts(std::span<const TimedVerdict> verdicts, std::size_t encoders,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "timestamp,anomaly,suspicious_count";
    for (std::size_t l = 1; l <= encoders; ++l) out << ",cost_" << l;
    out << '\n';
    for (const auto& tv : verdicts) {
        out << tv.timestamp << ',' << (tv.verdict.anomaly ? 1 : 0) << ',' << tv.verdict.suspicious_count;
        for (double c : tv.verdict.costs) out << ',' << text::format_real(c);
        out << '\n';
    }
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

/// Reads a verdict CSV. Per-encoder suspicious flags are not stored in the
/// file, so `suspicious` stays empty in the result.
inline std::vector<TimedVerdict> read_verdicts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header row");
    const auto header = text::split(line, ',');
    if (header.size() < 3 || header[0] != "timestamp" || header[1] != "anomaly" ||
        header[2] != "suspicious_count")
        throw DataError(path + ": header must start with timestamp,anomaly,suspicious_count");
    std::vector<TimedVerdict> out;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++row;
        const std::string where = path + ": row " + std::to_string(row);
        const auto fields = text::split(line, ',');
        if (fields.size() != header.size()) throw DataError(where + ": wrong column count");
        TimedVerdict tv;
        const auto ts = text::parse_int(fields[0]);
        const auto flag = text::parse_int(fields[1]);
        const auto count = text::parse_int(fields[2]);
        if (!ts || !flag || !count || (*flag != 0 && *flag != 1) || *count < 0)
            throw DataError(where + ": malformed verdict");
        tv.timestamp = *ts;
        tv.verdict.anomaly = *flag == 1;
        tv.verdict.suspicious_count = static_cast<std::size_t>(*count);
        for (std::size_t i = 3; i < fields.size(); ++i) {
            const auto c = text::parse_real(fields[i]);
            if (!c) throw DataError(where + ": non-numeric cost");
            tv.verdict.costs.push_back(*c);
        }
        out.push_back(std::move(tv));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training store and feedback

/// Append-only CSV of known-good records. Batch sizes are kept in a sidecar
/// file (`<path>.batches`, one row count per line) so each appended batch can
/// be split chronologically on its own when refitting. Without a sidecar the
/// whole file is one batch.
class TrainingStore {
public:
    explicit TrainingStore(std::string path) : path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }
    std::string batch_index_path() const { return path_ + ".batches"; }

    bool exists() const { return std::filesystem::exists(path_); }

    /// All records, in file order.
    Dataset records() const {
        auto in = detail::open_for_read(path_);
        return detail::parse_csv(in, path_, std::nullopt, {.require_order = false}).content.data;
    }

    /// Records grouped by append batch. Each batch must be chronological.
    std::vector<Dataset> batches() const {
        const Dataset all = records();
        std::vector<std::size_t> sizes = batch_sizes(all.size());
        std::vector<Dataset> out;
        std::size_t pos = 0;
        for (std::size_t size : sizes) {
            Dataset batch{all.schema, {}};
            batch.records.assign(all.records.begin() + static_cast<std::ptrdiff_t>(pos),
                                 all.records.begin() + static_cast<std::ptrdiff_t>(pos + size));
            for (std::size_t i = 1; i < batch.records.size(); ++i)
                if (batch.records[i].timestamp < batch.records[i - 1].timestamp)
                    throw DataError(path_ + ": row " + std::to_string(pos + i + 1) +
                                    ": decreasing timestamp within a batch");
            pos += size;
            out.push_back(std::move(batch));
        }
        return out;
    }

    /// Appends one batch; an empty batch leaves the store untouched.
    void append(const Dataset& batch) {
        if (batch.empty()) return;
        for (const auto& rec : batch.records) check_record(batch.schema, rec);
        for (std::size_t i = 1; i < batch.size(); ++i)
            if (batch.records[i].timestamp < batch.records[i - 1].timestamp)
                throw DataError("feedback batch is not in chronological order");

        if (exists()) {
            auto in = detail::open_for_read(path_);
            const auto current = detail::parse_csv(in, path_, std::nullopt, {.require_order = false});
            if (!(current.content.data.schema == batch.schema))
                throw ContractError("feedback records do not match the training store schema");
            const auto sizes = batch_sizes(current.content.data.size());
            if (!std::filesystem::exists(batch_index_path())) write_batch_index(sizes);
            std::ofstream out(path_, std::ios::binary | std::ios::app);
            if (!out) throw IoError("cannot open '" + path_ + "' for appending");
            // A labeled store keeps its label column; feedback rows are normal by definition.
            const std::vector<Label> normal(batch.size(), Label::normal);
            std::ostringstream rows;
            detail::write_rows(rows, batch, current.has_label ? &normal : nullptr);
            const std::string text = rows.str();
            out << text.substr(text.find('\n') + 1);
            if (!out.flush()) throw IoError("append to '" + path_ + "' failed");
        } else {
            write_csv(batch, path_);
        }
        std::ofstream index(batch_index_path(), std::ios::binary | std::ios::app);
        if (!index) throw IoError("cannot open '" + batch_index_path() + "' for appending");
        index << batch.size() << '\n';
        if (!index.flush()) throw IoError("append to '" + batch_index_path() + "' failed");
    }

private:
    std::vector<std::size_t> batch_sizes(std::size_t total) const {
        std::ifstream in(batch_index_path());
        if (!in) return total ? std::vector<std::size_t>{total} : std::vector<std::size_t>{};
        std::vector<std::size_t> sizes;
        std::size_t sum = 0;
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            const auto n = text::parse_int(text::trim(line));
            if (!n || *n <= 0) throw DataError(batch_index_path() + ": malformed batch size");
            sizes.push_back(static_cast<std::size_t>(*n));
            sum += sizes.back();
        }
        if (sum != total)
            throw DataError(batch_index_path() + ": batch sizes sum to " + std::to_string(sum) +
                            " but the store holds " + std::to_string(total) + " records");
        return sizes;
    }

    void write_batch_index(const std::vector<std::size_t>& sizes) const {
        std::ofstream out(batch_index_path(), std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + batch_index_path() + "' for writing");
        for (auto s : sizes) out << s << '\n';
    }

    std::string path_;
};

/// Adds operator-confirmed normal records to the store and refits from the
/// whole store with the same configuration (and seed).
inline DetectorModel feedback(TrainingStore& store, const Dataset& records, const DetectorConfig& cfg) {
    store.append(records);
    const auto batches = store.batches();
    return fit(batches, cfg);
}

}  // namespace vnfad
