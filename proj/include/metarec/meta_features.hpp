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
#include <map>
#include <optional>
#include <string>

#include "metarec/error.hpp"

namespace metarec {

struct ImageResolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageResolution&, const ImageResolution&) = default;
};

/// Dataset descriptors used both as learner inputs and as the retrieval key.
/// Values are kept at full precision; `rounded_for_display` applies the
/// serialization rounding (ratio/mean/std to 2 d.p., entropy to 4 d.p.).
struct MetaFeatures {
  std::int64_t total_images = 0;
  std::int64_t num_classes = 0;
  double class_imbalance_ratio = 1.0;
  double class_entropy = 0.0;  // bits
  double mean_class_size = 0.0;
  double std_class_size = 0.0;  // population form
  std::int64_t min_class_size = 0;
  std::int64_t max_class_size = 0;
  std::string modality;
  std::optional<ImageResolution> image_resolution;

  friend bool operator==(const MetaFeatures&, const MetaFeatures&) = default;
};

inline double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

inline MetaFeatures rounded_for_display(MetaFeatures meta) {
  meta.class_imbalance_ratio = round_to(meta.class_imbalance_ratio, 2);
  meta.class_entropy = round_to(meta.class_entropy, 4);
  meta.mean_class_size = round_to(meta.mean_class_size, 2);
  meta.std_class_size = round_to(meta.std_class_size, 2);
  return meta;
}

/// Computes descriptors from a label -> count manifest.
inline MetaFeatures compute_meta_features(
    const std::map<std::string, std::int64_t>& class_counts,
    std::string modality,
    std::optional<ImageResolution> resolution = std::nullopt) {
  if (class_counts.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "class count manifest is empty");
  }
  std::int64_t total = 0;
  std::int64_t lo = class_counts.begin()->second;
  std::int64_t hi = lo;
  for (const auto& [label, count] : class_counts) {
    if (count < 1) {
      throw Error(ErrorCode::kInvalidClassCount,
                  "class '" + label + "' has count " + std::to_string(count) +
                      " (must be >= 1)",
                  label);
    }
    total += count;
    lo = std::min(lo, count);
    hi = std::max(hi, count);
  }

  const auto n = static_cast<double>(class_counts.size());
  const double mean = static_cast<double>(total) / n;
  double entropy = 0.0;
  double sq_dev = 0.0;
  for (const auto& [label, count] : class_counts) {
    const double p = static_cast<double>(count) / static_cast<double>(total);
    entropy -= p * std::log2(p);
    const double d = static_cast<double>(count) - mean;
    sq_dev += d * d;
  }

  MetaFeatures meta;
  meta.total_images = total;
  meta.num_classes = static_cast<std::int64_t>(class_counts.size());
  meta.class_imbalance_ratio = static_cast<double>(hi) / static_cast<double>(lo);
  // -0.0 for the one-class case.
  meta.class_entropy = std::max(0.0, entropy);
  meta.mean_class_size = mean;
  meta.std_class_size = std::sqrt(sq_dev / n);
  meta.min_class_size = lo;
  meta.max_class_size = hi;
  meta.modality = std::move(modality);
  meta.image_resolution = resolution;
  return meta;
}

}  // namespace metarec
