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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metarec/error.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

/// One point of the search space. Field order matches the output contract.
struct HyperparameterConfig {
  std::string base_model;
  double learning_rate = 0.0;
  std::int64_t batch_size = 0;
  double dropout_rate = 0.0;
  std::int64_t dense_units = 0;
  std::string optimizer;
  std::string trainable_layers;

  friend bool operator==(const HyperparameterConfig&,
                         const HyperparameterConfig&) = default;
};

/// Stored outcome of one training run.
struct PerformanceMetrics {
  double f1 = 0.0;
  double acc = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double total_training_time = 0.0;  // seconds

  friend bool operator==(const PerformanceMetrics&,
                         const PerformanceMetrics&) = default;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "f1", "acc", "recall", "precision", "total_training_time"};
  return names;
}

inline bool is_metric_name(std::string_view name) {
  const auto& names = metric_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

inline double metric_value(const PerformanceMetrics& m, std::string_view name) {
  if (name == "f1") return m.f1;
  if (name == "acc") return m.acc;
  if (name == "recall") return m.recall;
  if (name == "precision") return m.precision;
  if (name == "total_training_time") return m.total_training_time;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown performance metric '" + std::string(name) + "'",
              std::string(name));
}

/// Numeric values match a space entry within this relative tolerance, which
/// absorbs decimal/scientific spelling differences ("1e-4" vs "0.0001").
inline constexpr double kNumericMatchTolerance = 1e-9;

inline bool numeric_matches(double value, double admissible) {
  return std::abs(value - admissible) <=
         kNumericMatchTolerance * std::max(std::abs(admissible), 1e-300);
}

/// Admissible values per parameter. Numeric lists are strictly increasing.
struct SearchSpace {
  std::vector<std::string> base_model;
  std::vector<double> learning_rate;
  std::vector<std::int64_t> batch_size;
  std::vector<double> dropout_rate;
  std::vector<std::int64_t> dense_units;
  std::vector<std::string> optimizer;
  std::vector<std::string> trainable_layers;

  /// The seven-parameter transfer-learning space used by the meta-dataset.
  static SearchSpace standard() {
    SearchSpace s;
    s.base_model = {"Xception",     "EfficientNetB5", "ResNet50",
                    "InceptionV3",  "NASNetMobile",   "DenseNet121",
                    "EfficientNetB0"};
    s.learning_rate = {1e-5, 1e-4, 1e-3};
    s.batch_size = {16, 32, 64};
    s.dropout_rate = {0.3, 0.4, 0.5};
    s.dense_units = {512, 1024, 1536};
    s.optimizer = {"adam", "sgd", "rmsprop"};
    s.trainable_layers = {"feature_extraction", "last_10", "last_30", "full"};
    return s;
  }

  /// Throws kInvalidArgument when a list is empty, unsorted or duplicated.
  void check_well_formed() const {
    auto check_labels = [](const std::vector<std::string>& v, const char* name) {
      if (v.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("search space '{}' is empty", name), name);
      }
      for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
          if (v[i] == v[j]) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("search space '{}' repeats '{}'", name, v[i]),
                        name);
          }
        }
      }
    };
    auto check_numbers = [](const auto& v, const char* name) {
      if (v.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("search space '{}' is empty", name), name);
      }
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i - 1] < v[i])) {
          throw Error(ErrorCode::kInvalidArgument,
                      fmt::format("search space '{}' is not strictly sorted", name),
                      name);
        }
      }
    };
    check_labels(base_model, "base_model");
    check_numbers(learning_rate, "learning_rate");
    check_numbers(batch_size, "batch_size");
    check_numbers(dropout_rate, "dropout_rate");
    check_numbers(dense_units, "dense_units");
    check_labels(optimizer, "optimizer");
    check_labels(trainable_layers, "trainable_layers");
  }

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

struct Violation {
  std::string parameter;
  std::string value;
  std::string admissible;  // rendered list, e.g. "[16, 32, 64]"
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }

  std::string describe() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += fmt::format("{} = {} not in {}", v.parameter, v.value, v.admissible);
    }
    return out;
  }
};

namespace detail {

inline std::string render_list(const std::vector<std::string>& values) {
  return "[" + fmt::format("{}", fmt::join(values, ", ")) + "]";
}

inline std::string render_list(const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(format_decimal(v));
  return render_list(parts);
}

inline std::string render_list(const std::vector<std::int64_t>& values) {
  std::vector<std::string> parts;
  for (auto v : values) parts.push_back(std::to_string(v));
  return render_list(parts);
}

}  // namespace detail

inline bool in_space(const std::vector<std::string>& admissible,
                     const std::string& value) {
  return std::find(admissible.begin(), admissible.end(), value) != admissible.end();
}

inline bool in_space(const std::vector<double>& admissible, double value) {
  return std::any_of(admissible.begin(), admissible.end(),
                     [&](double a) { return numeric_matches(value, a); });
}

inline bool in_space(const std::vector<std::int64_t>& admissible,
                     std::int64_t value) {
  return std::find(admissible.begin(), admissible.end(), value) != admissible.end();
}

/// Checks every field against the space. Violations are returned, not thrown.
inline ValidationResult validate_config(const HyperparameterConfig& config,
                                        const SearchSpace& space) {
  ValidationResult result;
  auto check = [&](const char* name, const auto& admissible, const auto& value,
                   std::string rendered) {
    if (!in_space(admissible, value)) {
      result.violations.push_back(
          {name, std::move(rendered), detail::render_list(admissible)});
    }
  };
  check("base_model", space.base_model, config.base_model, config.base_model);
  check("learning_rate", space.learning_rate, config.learning_rate,
        format_decimal(config.learning_rate));
  check("batch_size", space.batch_size, config.batch_size,
        std::to_string(config.batch_size));
  check("dropout_rate", space.dropout_rate, config.dropout_rate,
        format_decimal(config.dropout_rate));
  check("dense_units", space.dense_units, config.dense_units,
        std::to_string(config.dense_units));
  check("optimizer", space.optimizer, config.optimizer, config.optimizer);
  check("trainable_layers", space.trainable_layers, config.trainable_layers,
        config.trainable_layers);
  return result;
}

/// Number of fields on which two configurations differ.
inline int config_distance(const HyperparameterConfig& a,
                           const HyperparameterConfig& b) {
  int d = 0;
  d += a.base_model != b.base_model;
  d += !numeric_matches(a.learning_rate, b.learning_rate);
  d += a.batch_size != b.batch_size;
  d += !numeric_matches(a.dropout_rate, b.dropout_rate);
  d += a.dense_units != b.dense_units;
  d += a.optimizer != b.optimizer;
  d += a.trainable_layers != b.trainable_layers;
  return d;
}

}  // namespace metarec
