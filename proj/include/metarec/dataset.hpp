/*
 * Copyright 2026 The metarec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <ctime>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/error.hpp"
#include "metarec/feature_encoding.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/search_space.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

/// One historical trial. `*_extra` hold unrecognized keys of each JSON
/// section so they survive a load/save cycle.
struct ExperimentRecord {
  std::int64_t record_id = 0;
  std::string dataset_name;
  MetaFeatures meta;
  HyperparameterConfig config;
  PerformanceMetrics metrics;

  nlohmann::json extra = nlohmann::json::object();
  nlohmann::json meta_extra = nlohmann::json::object();
  nlohmann::json config_extra = nlohmann::json::object();
  nlohmann::json metrics_extra = nlohmann::json::object();

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

struct Provenance {
  std::string source;
  std::string ingested_at;  // ISO-8601 UTC, empty when built in memory
};

struct MetaDataset {
  std::vector<ExperimentRecord> records;
  Provenance provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const ExperimentRecord& operator[](std::size_t i) const { return records[i]; }
};

struct RecordIssue {
  ErrorCode code;  // kSchemaError or kRangeError
  std::string field;
  std::string message;
};

/// Checks every type invariant of a record. Meta-feature relations allow for
/// the display rounding applied on save.
inline std::vector<RecordIssue> check_record(const ExperimentRecord& r,
                                             const SearchSpace* space = nullptr) {
  std::vector<RecordIssue> issues;
  auto schema = [&](std::string field, std::string msg) {
    issues.push_back({ErrorCode::kSchemaError, std::move(field), std::move(msg)});
  };
  auto range = [&](std::string field, std::string msg) {
    issues.push_back({ErrorCode::kRangeError, std::move(field), std::move(msg)});
  };

  if (r.dataset_name.empty()) schema("dataset_name", "must be non-empty");

  const MetaFeatures& m = r.meta;
  if (m.num_classes < 1) schema("meta.num_classes", "must be >= 1");
  if (m.min_class_size < 1) schema("meta.min_class_size", "must be >= 1");
  if (m.max_class_size < m.min_class_size) {
    schema("meta.max_class_size", "must be >= min_class_size");
  }
  if (m.modality.empty()) schema("meta.modality", "must be non-empty");
  if (issues.empty()) {
    const double nc = static_cast<double>(m.num_classes);
    const double lo = static_cast<double>(m.min_class_size);
    const double hi = static_cast<double>(m.max_class_size);
    const double tol2 = 0.005 + 1e-9;  // half a unit in the 2nd decimal
    if (!std::isfinite(m.mean_class_size) || m.mean_class_size < lo - tol2 ||
        m.mean_class_size > hi + tol2) {
      schema("meta.mean_class_size", "must lie within [min, max] class size");
    }
    if (std::abs(m.mean_class_size * nc - static_cast<double>(m.total_images)) >
        tol2 * nc) {
      schema("meta.total_images", "must equal num_classes * mean_class_size");
    }
    if (!std::isfinite(m.class_imbalance_ratio) ||
        std::abs(m.class_imbalance_ratio - hi / lo) > tol2) {
      schema("meta.class_imbalance_ratio", "must equal max / min class size");
    }
    if (!std::isfinite(m.class_entropy) || m.class_entropy < 0.0 ||
        m.class_entropy > std::log2(nc) + 5e-5 + 1e-12) {
      schema("meta.class_entropy", "must lie within [0, log2(num_classes)]");
    }
    if (!std::isfinite(m.std_class_size) || m.std_class_size < 0.0) {
      schema("meta.std_class_size", "must be finite and >= 0");
    }
  }
  if (m.image_resolution &&
      (m.image_resolution->width < 1 || m.image_resolution->height < 1)) {
    schema("meta.image_resolution", "dimensions must be >= 1");
  }

  const HyperparameterConfig& c = r.config;
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    range("config.learning_rate", "must be positive");
  }
  if (c.batch_size < 1) range("config.batch_size", "must be positive");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate <= 1.0)) {
    range("config.dropout_rate",
          fmt::format("{} outside [0, 1]", format_shortest(c.dropout_rate)));
  }
  if (c.dense_units < 1) range("config.dense_units", "must be positive");
  if (space != nullptr) {
    for (const auto& v : validate_config(c, *space).violations) {
      schema("config." + v.parameter,
             fmt::format("{} not in search space {}", v.value, v.admissible));
    }
  }

  const PerformanceMetrics& p = r.metrics;
  auto rate = [&](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      range(std::string("metrics.") + name,
            fmt::format("{} outside [0, 1]", format_shortest(v)));
    }
  };
  rate("f1", p.f1);
  rate("acc", p.acc);
  rate("recall", p.recall);
  rate("precision", p.precision);
  if (!(p.total_training_time > 0.0) || !std::isfinite(p.total_training_time)) {
    range("metrics.total_training_time", "must be finite and > 0");
  }
  return issues;
}

namespace detail {

inline std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RecordReader {
 public:
  explicit RecordReader(std::size_t index) : index_(index) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("record {}: field '{}' {}", index_, field, msg), field);
  }

  const nlohmann::json& section(const nlohmann::json& obj, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(key, "is missing");
    if (!it->is_object()) fail(key, "must be an object");
    return *it;
  }

  double real(const nlohmann::json& obj, const std::string& prefix,
              const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(prefix + key, "is missing");
    if (!it->is_number()) fail(prefix + key, "must be a number");
    return it->get<double>();
  }

  std::int64_t integer(const nlohmann::json& obj, const std::string& prefix,
                       const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(prefix + key, "is missing");
    if (it->is_number_integer()) return it->get<std::int64_t>();
    if (it->is_number_float()) {
      const double v = it->get<double>();
      if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) {
        return static_cast<std::int64_t>(v);
      }
    }
    fail(prefix + key, "must be an integer");
  }

  std::string text(const nlohmann::json& obj, const std::string& prefix,
                   const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(prefix + key, "is missing");
    if (!it->is_string()) fail(prefix + key, "must be a string");
    return it->get<std::string>();
  }

 private:
  std::size_t index_;
};

inline nlohmann::json extras_of(const nlohmann::json& obj,
                                std::initializer_list<const char*> known) {
  nlohmann::json out = nlohmann::json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) is_known = is_known || it.key() == k;
    if (!is_known) out[it.key()] = it.value();
  }
  return out;
}

}  // namespace detail

/// Decodes one meta-dataset entry. Does not check invariants.
inline ExperimentRecord record_from_json(const nlohmann::json& j, std::size_t index) {
  detail::RecordReader rd(index);
  if (!j.is_object()) rd.fail("<entry>", "must be an object");

  ExperimentRecord r;
  r.record_id = static_cast<std::int64_t>(index);
  r.dataset_name = rd.text(j, "", "dataset_name");
  r.extra = detail::extras_of(j, {"dataset_name", "meta", "config", "metrics"});

  const auto& meta = rd.section(j, "meta");
  r.meta.total_images = rd.integer(meta, "meta.", "total_images");
  r.meta.num_classes = rd.integer(meta, "meta.", "num_classes");
  r.meta.class_imbalance_ratio = rd.real(meta, "meta.", "class_imbalance_ratio");
  r.meta.class_entropy = rd.real(meta, "meta.", "class_entropy");
  r.meta.mean_class_size = rd.real(meta, "meta.", "mean_class_size");
  r.meta.std_class_size = rd.real(meta, "meta.", "std_class_size");
  r.meta.min_class_size = rd.integer(meta, "meta.", "min_class_size");
  r.meta.max_class_size = rd.integer(meta, "meta.", "max_class_size");
  r.meta.modality = rd.text(meta, "meta.", "modality");
  if (auto it = meta.find("image_resolution"); it != meta.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer()) {
      rd.fail("meta.image_resolution", "must be [width, height]");
    }
    r.meta.image_resolution =
        ImageResolution{(*it)[0].get<int>(), (*it)[1].get<int>()};
  }
  r.meta_extra = detail::extras_of(
      meta, {"total_images", "num_classes", "class_imbalance_ratio", "class_entropy",
             "mean_class_size", "std_class_size", "min_class_size", "max_class_size",
             "modality", "image_resolution"});

  const auto& config = rd.section(j, "config");
  const bool has_model = config.contains("model");
  const bool has_base_model = config.contains("base_model");
  if (has_model && has_base_model) {
    rd.fail("config.model", "given together with 'base_model'");
  }
  r.config.base_model =
      rd.text(config, "config.", has_base_model ? "base_model" : "model");
  r.config.learning_rate = rd.real(config, "config.", "learning_rate");
  r.config.batch_size = rd.integer(config, "config.", "batch_size");
  r.config.dropout_rate = rd.real(config, "config.", "dropout_rate");
  r.config.dense_units = rd.integer(config, "config.", "dense_units");
  r.config.optimizer = rd.text(config, "config.", "optimizer");
  r.config.trainable_layers = rd.text(config, "config.", "trainable_layers");
  r.config_extra = detail::extras_of(
      config, {"model", "base_model", "learning_rate", "batch_size", "dropout_rate",
               "dense_units", "optimizer", "trainable_layers"});

  const auto& metrics = rd.section(j, "metrics");
  r.metrics.f1 = rd.real(metrics, "metrics.", "f1");
  r.metrics.acc = rd.real(metrics, "metrics.", "acc");
  r.metrics.recall = rd.real(metrics, "metrics.", "recall");
  r.metrics.precision = rd.real(metrics, "metrics.", "precision");
  r.metrics.total_training_time =
      rd.real(metrics, "metrics.", "total_training_time");
  r.metrics_extra = detail::extras_of(
      metrics, {"f1", "acc", "recall", "precision", "total_training_time"});
  return r;
}

struct LoadOptions {
  /// When set, configurations must lie inside this space.
  std::optional<SearchSpace> space = SearchSpace::standard();
};

/// Parses a meta-dataset document held in memory.
inline MetaDataset parse_dataset(const std::string& text, const LoadOptions& options = {},
                                 std::string source = "<memory>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
    const auto [line, col] = line_and_column(text, offset);
    throw Error(ErrorCode::kParseError,
                fmt::format("{}: malformed JSON at byte {} (line {}, column {}): {}",
                            source, offset, line, col, e.what()));
  }
  // A lone entry object counts as a one-entry document.
  if (doc.is_object()) doc = nlohmann::json::array({std::move(doc)});
  if (!doc.is_array()) {
    throw Error(ErrorCode::kSchemaError,
                source + ": top-level value must be an entry or an array of entries");
  }
  MetaDataset ds;
  ds.provenance = {std::move(source), detail::iso_utc_now()};
  ds.records.reserve(doc.size());
  const SearchSpace* space = options.space ? &*options.space : nullptr;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    ExperimentRecord r = record_from_json(doc[i], i);
    const auto issues = check_record(r, space);
    if (!issues.empty()) {
      const auto& first = issues.front();
      throw Error(first.code,
                  fmt::format("record {}: field '{}' {}", i, first.field, first.message),
                  first.field);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

inline MetaDataset load(const std::string& path, const LoadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), options, path);
}

namespace detail {

inline std::string dump_number(double v) { return nlohmann::json(v).dump(); }

inline void emit_extras(std::string& out, const nlohmann::json& extras,
                        const char* indent) {
  for (auto it = extras.begin(); it != extras.end(); ++it) {
    out += fmt::format(",\n{}{}: {}", indent, nlohmann::json(it.key()).dump(),
                       it.value().dump());
  }
}

}  // namespace detail

/// Serializes one entry in the canonical key order with display rounding.
inline std::string record_to_json_text(const ExperimentRecord& r,
                                       const char* indent = "  ") {
  using detail::dump_number;
  const MetaFeatures m = rounded_for_display(r.meta);
  const std::string i1 = indent;
  const std::string i2 = i1 + "  ";
  const std::string i3 = i2 + "  ";
  std::string out;
  out += i1 + "{\n";
  out += fmt::format("{}\"dataset_name\": {},\n", i2, nlohmann::json(r.dataset_name).dump());
  out += i2 + "\"meta\": {\n";
  out += fmt::format("{}\"total_images\": {},\n", i3, m.total_images);
  out += fmt::format("{}\"num_classes\": {},\n", i3, m.num_classes);
  out += fmt::format("{}\"class_imbalance_ratio\": {},\n", i3, dump_number(m.class_imbalance_ratio));
  out += fmt::format("{}\"class_entropy\": {},\n", i3, dump_number(m.class_entropy));
  out += fmt::format("{}\"mean_class_size\": {},\n", i3, dump_number(m.mean_class_size));
  out += fmt::format("{}\"std_class_size\": {},\n", i3, dump_number(m.std_class_size));
  out += fmt::format("{}\"min_class_size\": {},\n", i3, m.min_class_size);
  out += fmt::format("{}\"max_class_size\": {},\n", i3, m.max_class_size);
  out += fmt::format("{}\"modality\": {}", i3, nlohmann::json(m.modality).dump());
  if (m.image_resolution) {
    out += fmt::format(",\n{}\"image_resolution\": [{}, {}]", i3,
                       m.image_resolution->width, m.image_resolution->height);
  }
  detail::emit_extras(out, r.meta_extra, i3.c_str());
  out += "\n" + i2 + "},\n";

  const HyperparameterConfig& c = r.config;
  out += i2 + "\"config\": {\n";
  out += fmt::format("{}\"model\": {},\n", i3, nlohmann::json(c.base_model).dump());
  out += fmt::format("{}\"learning_rate\": {},\n", i3, format_decimal(c.learning_rate));
  out += fmt::format("{}\"batch_size\": {},\n", i3, c.batch_size);
  out += fmt::format("{}\"dropout_rate\": {},\n", i3, dump_number(c.dropout_rate));
  out += fmt::format("{}\"dense_units\": {},\n", i3, c.dense_units);
  out += fmt::format("{}\"optimizer\": {},\n", i3, nlohmann::json(c.optimizer).dump());
  out += fmt::format("{}\"trainable_layers\": {}", i3,
                     nlohmann::json(c.trainable_layers).dump());
  detail::emit_extras(out, r.config_extra, i3.c_str());
  out += "\n" + i2 + "},\n";

  const PerformanceMetrics& p = r.metrics;
  out += i2 + "\"metrics\": {\n";
  out += fmt::format("{}\"f1\": {},\n", i3, dump_number(p.f1));
  out += fmt::format("{}\"acc\": {},\n", i3, dump_number(p.acc));
  out += fmt::format("{}\"recall\": {},\n", i3, dump_number(p.recall));
  out += fmt::format("{}\"precision\": {},\n", i3, dump_number(p.precision));
  out += fmt::format("{}\"total_training_time\": {}", i3,
                     dump_number(p.total_training_time));
  detail::emit_extras(out, r.metrics_extra, i3.c_str());
  out += "\n" + i2 + "}";
  detail::emit_extras(out, r.extra, i2.c_str());
  out += "\n" + i1 + "}";
  return out;
}

inline std::string serialize_dataset(const MetaDataset& ds) {
  if (ds.empty()) return "[]\n";
  std::string out = "[\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i > 0) out += ",\n";
    out += record_to_json_text(ds.records[i]);
  }
  out += "\n]\n";
  return out;
}

inline void save(const MetaDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  out << serialize_dataset(ds);
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

/// Returns a copy of `ds` with `record` at the tail and id = max id + 1.
inline MetaDataset append(const MetaDataset& ds, ExperimentRecord record,
                          const SearchSpace* space = nullptr) {
  const auto issues = check_record(record, space);
  if (!issues.empty()) {
    const auto& first = issues.front();
    throw Error(ErrorCode::kSchemaError,
                fmt::format("appended record: field '{}' {}", first.field, first.message),
                first.field);
  }
  MetaDataset out = ds;
  record.record_id = ds.empty() ? 0 : ds.records.back().record_id + 1;
  out.records.push_back(std::move(record));
  return out;
}

/// Category codes in first-seen order over the dataset.
inline EncodingTable build_encoding_table(const MetaDataset& ds) {
  EncodingTable table;
  for (const auto& r : ds.records) observe_labels(table, r.meta, r.config);
  return table;
}

inline std::vector<FeatureVector> encode_dataset(
    const MetaDataset& ds, const std::shared_ptr<const FeatureSchema>& schema) {
  std::vector<FeatureVector> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(encode(r.meta, r.config, schema));
  return out;
}

}  // namespace metarec
