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

// Fixed inputs shared by the golden-prompt tests.

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "metarec.hpp"

namespace metarec::testing {

inline const std::map<std::string, std::int64_t>& brain_counts() {
  static const std::map<std::string, std::int64_t> counts = {
      {"glioma", 926}, {"meningioma", 937}, {"no_tumor", 901}, {"pituitary", 500}};
  return counts;
}

inline HyperparameterConfig brain_config() {
  return {"ResNet50", 1e-4, 32, 0.4, 1024, "sgd", "last_10"};
}

inline MetaFeatures brain_meta() { return compute_meta_features(brain_counts(), "MRI"); }

inline std::string golden_summary() {
  return "# SHAP Analysis Summary: Hyperparameter Effects on Test Accuracy\n"
         "\n**Model Architecture**: EfficientNetB0 (+0.026) and ResNet50 (+0.022) show strong "
         "positive effects, while NASNetMobile (-0.144) and Xception (-0.032) perform poorly.\n"
         "\n**Learning Rate**: 0.0001 (+0.041) shows strong positive effects, while 0.001 "
         "(-0.037) performs poorly. Correlation with SHAP r = -0.412 (higher values lower the "
         "prediction).\n";
}

// Three retrieved experiments with hand-picked distances and local SHAP.
inline RetrievedContext golden_context() {
  RetrievedContext ctx;
  const std::vector<std::pair<std::string, HyperparameterConfig>> rows = {
      {"brain", brain_config()},
      {"alzheimer", {"EfficientNetB0", 1e-3, 16, 0.3, 512, "adam", "full"}},
      {"chest_xray", {"DenseNet121", 1e-5, 64, 0.5, 1536, "rmsprop", "feature_extraction"}},
  };
  const std::vector<std::map<std::string, std::int64_t>> counts = {
      brain_counts(),
      {{"mild", 896}, {"moderate", 64}, {"none", 3200}, {"very_mild", 2240}},
      {{"normal", 1583}, {"pneumonia", 4273}},
  };
  const std::vector<const char*> modality = {"MRI", "MRI", "X-ray"};
  const std::vector<double> distance = {0.0, 1.2345678, 2.5};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ContextEntry e;
    e.record.record_id = static_cast<std::int64_t>(10 + i);
    e.record.dataset_name = rows[i].first;
    e.record.meta = rounded_for_display(compute_meta_features(counts[i], modality[i]));
    e.record.config = rows[i].second;
    const double acc = 0.746 - 0.05 * static_cast<double>(i);
    e.record.metrics = {acc - 0.005, acc, acc, acc - 0.002, 76.818 + 10.0 * static_cast<double>(i)};
    e.distance = distance[i];
    e.top_features.entries = {
        {"base_model", 0.0, e.record.config.base_model, 0.0312 - 0.01 * static_cast<double>(i)},
        {"learning_rate", e.record.config.learning_rate,
         format_decimal(e.record.config.learning_rate), -0.0188},
        {"total_images", static_cast<double>(e.record.meta.total_images),
         std::to_string(e.record.meta.total_images), 0.0051}};
    ctx.entries.push_back(std::move(e));
  }
  return ctx;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace metarec::testing
