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

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "metarec/error.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/search_space.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

/// How a feature is summarized after attribution: categorical and discrete
/// features are grouped by value, continuous ones only get a correlation.
enum class FeatureKind { kContinuous, kDiscrete, kCategorical };

/// Per-feature label <-> integer code bijection. Codes are assigned in
/// first-seen order and never change once assigned.
class EncodingTable {
 public:
  /// Returns the code for `label`, assigning the next free one if new.
  int observe(const std::string& feature, const std::string& label) {
    auto& labels = labels_[feature];
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return static_cast<int>(i);
    }
    labels.push_back(label);
    return static_cast<int>(labels.size() - 1);
  }

  int code(const std::string& feature, const std::string& label) const {
    auto it = labels_.find(feature);
    if (it != labels_.end()) {
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (it->second[i] == label) return static_cast<int>(i);
      }
    }
    throw Error(ErrorCode::kUnknownCategory,
                "label '" + label + "' has no code for feature '" + feature + "'",
                feature + "=" + label);
  }

  const std::string& label(const std::string& feature, int code) const {
    auto it = labels_.find(feature);
    if (it == labels_.end() || code < 0 ||
        static_cast<std::size_t>(code) >= it->second.size()) {
      throw Error(ErrorCode::kUnknownCategory,
                  "code " + std::to_string(code) + " has no label for feature '" +
                      feature + "'",
                  feature);
    }
    return it->second[static_cast<std::size_t>(code)];
  }

  /// Ordered labels of one feature (index == code); empty if unknown.
  const std::vector<std::string>& labels(const std::string& feature) const {
    static const std::vector<std::string> kEmpty;
    auto it = labels_.find(feature);
    return it == labels_.end() ? kEmpty : it->second;
  }

  const std::map<std::string, std::vector<std::string>>& entries() const {
    return labels_;
  }

  friend bool operator==(const EncodingTable&, const EncodingTable&) = default;

 private:
  std::map<std::string, std::vector<std::string>> labels_;
};

/// Names, kinds and category codes of a model's input features.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  EncodingTable table;

  std::size_t size() const { return names.size(); }

  /// Human-readable rendering of a feature value (decoded for categoricals).
  std::string value_label(std::size_t feature, double value) const {
    if (kinds.at(feature) == FeatureKind::kCategorical) {
      return table.label(names[feature], static_cast<int>(std::lround(value)));
    }
    return format_decimal(value);
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// The fixed feature order used for every record: eight numeric
/// descriptors, modality, then the seven configuration fields.
inline const std::vector<std::string>& standard_feature_names() {
  static const std::vector<std::string> names = {
      "total_images",     "num_classes",     "class_imbalance_ratio",
      "class_entropy",    "mean_class_size", "std_class_size",
      "min_class_size",   "max_class_size",  "modality",
      "base_model",       "learning_rate",   "batch_size",
      "dropout_rate",     "dense_units",     "optimizer",
      "trainable_layers"};
  return names;
}

inline FeatureSchema standard_schema(EncodingTable table) {
  using K = FeatureKind;
  FeatureSchema schema;
  schema.names = standard_feature_names();
  schema.kinds = {K::kContinuous,  K::kContinuous,  K::kContinuous,
                  K::kContinuous,  K::kContinuous,  K::kContinuous,
                  K::kContinuous,  K::kContinuous,  K::kCategorical,
                  K::kCategorical, K::kDiscrete,    K::kDiscrete,
                  K::kDiscrete,    K::kDiscrete,    K::kCategorical,
                  K::kCategorical};
  schema.table = std::move(table);
  return schema;
}

/// Registers the categorical labels of one record in first-seen order.
inline void observe_labels(EncodingTable& table, const MetaFeatures& meta,
                           const HyperparameterConfig& config) {
  table.observe("modality", meta.modality);
  table.observe("base_model", config.base_model);
  table.observe("optimizer", config.optimizer);
  table.observe("trainable_layers", config.trainable_layers);
}

/// Encoded learner input. `schema` is shared by every vector of a model.
struct FeatureVector {
  std::vector<double> values;
  std::shared_ptr<const FeatureSchema> schema;

  std::size_t size() const { return values.size(); }
  const std::vector<std::string>& names() const { return schema->names; }
};

inline FeatureVector encode(const MetaFeatures& meta,
                            const HyperparameterConfig& config,
                            std::shared_ptr<const FeatureSchema> schema) {
  const EncodingTable& table = schema->table;
  auto as_real = [](std::int64_t v) { return static_cast<double>(v); };
  FeatureVector x;
  x.values = {
      as_real(meta.total_images),
      as_real(meta.num_classes),
      meta.class_imbalance_ratio,
      meta.class_entropy,
      meta.mean_class_size,
      meta.std_class_size,
      as_real(meta.min_class_size),
      as_real(meta.max_class_size),
      static_cast<double>(table.code("modality", meta.modality)),
      static_cast<double>(table.code("base_model", config.base_model)),
      config.learning_rate,
      as_real(config.batch_size),
      config.dropout_rate,
      as_real(config.dense_units),
      static_cast<double>(table.code("optimizer", config.optimizer)),
      static_cast<double>(table.code("trainable_layers", config.trainable_layers)),
  };
  if (x.values.size() != schema->size()) {
    throw Error(ErrorCode::kDimensionError,
                "schema has " + std::to_string(schema->size()) +
                    " features, encoder emits " + std::to_string(x.values.size()));
  }
  x.schema = std::move(schema);
  return x;
}

}  // namespace metarec
