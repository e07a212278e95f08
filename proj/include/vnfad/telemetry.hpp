#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vnfad/error.hpp"
#include "vnfad/text.hpp"

namespace vnfad {

/// Ordered, unique feature names. The dimension d is the number of names.
class FeatureSchema {
public:
    FeatureSchema() = default;

    explicit FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.empty()) throw DataError("schema: at least one feature is required");
        std::set<std::string_view> seen;
        for (const auto& name : names_) {
            if (name.empty()) throw DataError("schema: empty feature name");
            if (name == "timestamp" || name == "label")
                throw DataError("schema: reserved feature name '" + name + "'");
            if (!seen.insert(name).second)
                throw DataError("schema: duplicate feature name '" + name + "'");
        }
    }

    /// cpu_util_pct, mem_used_bytes, mem_used_nocache_bytes, disk_used_bytes,
    /// net_in_bps, net_out_bps.
    static FeatureSchema default_schema() {
        return FeatureSchema({"cpu_util_pct", "mem_used_bytes", "mem_used_nocache_bytes",
                              "disk_used_bytes", "net_in_bps", "net_out_bps"});
    }

    std::size_t dimension() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    std::optional<std::size_t> index_of(std::string_view name) const {
        const auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - names_.begin());
    }

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

private:
    std::vector<std::string> names_;
};

struct MetricRecord {
    std::int64_t timestamp = 0;
    std::vector<double> values;

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Throws ContractError unless rec has schema.dimension() finite values.
inline void check_record(const FeatureSchema& schema, const MetricRecord& rec) {
    if (rec.values.size() != schema.dimension()) {
        throw ContractError("record at t=" + std::to_string(rec.timestamp) + " has " +
                            std::to_string(rec.values.size()) + " values, schema expects " +
                            std::to_string(schema.dimension()));
    }
    for (std::size_t k = 0; k < rec.values.size(); ++k) {
        if (!std::isfinite(rec.values[k])) {
            throw ContractError("record at t=" + std::to_string(rec.timestamp) +
                                ": non-finite value for " + schema.names()[k]);
        }
    }
}

struct Dataset {
    FeatureSchema schema;
    std::vector<MetricRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    /// Values of every record as plain vectors (row view for the learners).
    std::vector<std::vector<double>> rows() const {
        std::vector<std::vector<double>> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.values);
        return out;
    }

    std::vector<double> column(std::size_t k) const {
        std::vector<double> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.values[k]);
        return out;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class Label { normal, fault };

inline std::string_view to_string(Label label) {
    return label == Label::fault ? "fault" : "normal";
}

/// Dataset with ground truth; only evaluation code consumes the labels.
struct LabeledDataset {
    Dataset data;
    std::vector<Label> labels;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

namespace detail {

struct CsvOptions {
    bool require_order = true;
};

struct ParsedCsv {
    LabeledDataset content;
    bool has_label = false;
};

inline ParsedCsv parse_csv(std::istream& in, const std::string& source,
                           const std::optional<FeatureSchema>& schema, CsvOptions options = {}) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line).empty())
        throw DataError(source + ": missing header row");

    auto header = text::split(line, ',');
    if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF"))
        header.front().remove_prefix(3);
    if (header.empty() || header.front() != "timestamp")
        throw DataError(source + ": header must start with 'timestamp'");

    const bool has_label = header.size() > 1 && header.back() == "label";
    std::vector<std::string> names;
    for (std::size_t i = 1; i + (has_label ? 1 : 0) < header.size(); ++i)
        names.emplace_back(header[i]);

    FeatureSchema file_schema;
    try {
        file_schema = FeatureSchema(names);
    } catch (const DataError& e) {
        throw DataError(source + ": bad header: " + e.what());
    }
    if (schema && !(*schema == file_schema)) {
        for (const auto& expected : schema->names()) {
            if (!file_schema.index_of(expected))
                throw DataError(source + ": missing header column '" + expected + "'");
        }
        throw DataError(source + ": header columns do not match the expected schema");
    }

    ParsedCsv parsed;
    parsed.has_label = has_label;
    LabeledDataset& out = parsed.content;
    out.data.schema = file_schema;
    const std::size_t width = header.size();
    const std::size_t d = file_schema.dimension();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++row;
        const std::string where = source + ": row " + std::to_string(row);
        const auto fields = text::split(line, ',');
        if (fields.size() != width)
            throw DataError(where + ": expected " + std::to_string(width) + " columns, got " +
                            std::to_string(fields.size()));
        MetricRecord rec;
        const auto ts = text::parse_int(fields[0]);
        if (!ts) throw DataError(where + ": non-integer timestamp");
        rec.timestamp = *ts;
        rec.values.reserve(d);
        for (std::size_t k = 0; k < d; ++k) {
            const auto v = text::parse_real(fields[k + 1]);
            if (!v) throw DataError(where + ": non-numeric value");
            if (!std::isfinite(*v)) throw DataError(where + ": non-finite value");
            rec.values.push_back(*v);
        }
        if (options.require_order && !out.data.records.empty() &&
            rec.timestamp < out.data.records.back().timestamp)
            throw DataError(where + ": decreasing timestamp");
        if (has_label) {
            const auto label = fields.back();
            if (label == "normal")
                out.labels.push_back(Label::normal);
            else if (label == "fault")
                out.labels.push_back(Label::fault);
            else
                throw DataError(where + ": unknown label '" + std::string(label) + "'");
        }
        out.data.records.push_back(std::move(rec));
    }
    return parsed;
}

inline std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline void write_rows(std::ostream& out, const Dataset& ds, const std::vector<Label>* labels) {
    out << "timestamp";
    for (const auto& name : ds.schema.names()) out << ',' << name;
    if (labels) out << ",label";
    out << '\n';
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& rec = ds.records[i];
        out << rec.timestamp;
        for (double v : rec.values) out << ',' << text::format_real(v);
        if (labels) out << ',' << to_string((*labels)[i]);
        out << '\n';
    }
}

inline void write_file(const std::string& path, const Dataset& ds,
                       const std::vector<Label>* labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_rows(out, ds, labels);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

/// Reads a telemetry CSV. With no schema the feature columns are inferred from
/// the header; a trailing `label` column is accepted and ignored.
inline Dataset read_csv(const std::string& path,
                        const std::optional<FeatureSchema>& schema = std::nullopt) {
    auto in = detail::open_for_read(path);
    return detail::parse_csv(in, path, schema).content.data;
}

/// Reads a telemetry CSV that must carry a `label` column.
inline LabeledDataset read_labeled_csv(const std::string& path,
                                       const std::optional<FeatureSchema>& schema = std::nullopt) {
    auto in = detail::open_for_read(path);
    auto parsed = detail::parse_csv(in, path, schema);
    if (!parsed.has_label) throw DataError(path + ": missing 'label' column");
    return std::move(parsed.content);
}

inline void write_csv(const Dataset& ds, const std::string& path) {
    detail::write_file(path, ds, nullptr);
}

inline void write_csv(const LabeledDataset& ds, const std::string& path) {
    if (ds.labels.size() != ds.data.size())
        throw ContractError("write_csv: label count does not match record count");
    detail::write_file(path, ds.data, &ds.labels);
}

/// Splits off the first ceil(train_fraction * n) records for training, keeping
/// at least one record on each side.
inline std::pair<Dataset, Dataset> chrono_split(const Dataset& ds, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    const std::size_t n = ds.size();
    if (n < 2) throw DataError("chrono_split: need at least 2 records, got " + std::to_string(n));
    auto cut = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
    cut = std::clamp<std::size_t>(cut, 1, n - 1);

    Dataset train{ds.schema, {}};
    Dataset validation{ds.schema, {}};
    train.records.assign(ds.records.begin(), ds.records.begin() + static_cast<std::ptrdiff_t>(cut));
    validation.records.assign(ds.records.begin() + static_cast<std::ptrdiff_t>(cut),
                              ds.records.end());
    return {std::move(train), std::move(validation)};
}

}  // namespace vnfad
