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

#include <string>
#include <string_view>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/error.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/recommendation.hpp"
#include "metarec/retrieval.hpp"
#include "metarec/search_space.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

// Bump together with tests/golden/prompt_v*.txt whenever the wording changes.
inline constexpr int kPromptTemplateVersion = 1;

inline constexpr std::string_view kInstructionBlock =
    R"(## Role
You choose transfer-learning settings for medical image classifiers. Work only from the material in this prompt: the dataset description, the SHAP summary of the performance model and the retrieved experiment records.

## Caveat
The stored configurations were drawn at random, so their scores are uneven. A single high score is weak evidence; prefer settings that do well across many records.)";

inline constexpr std::string_view kTaskText =
    R"(## Task
Choose one configuration for the dataset described above. Justify each value by citing the SHAP summary and the retrieved records. Use only values listed in the search space.)";

inline constexpr std::string_view kExperimentDelimiter = "### Experiment ";

/// The five prompt sections plus the assembled text.
struct PromptBundle {
  std::string instruction;
  std::string dataset_block;
  std::string summary_block;
  std::string context_block;
  std::string format_block;
  std::string rendered;
};

inline std::string format_meta_inline(const MetaFeatures& meta) {
  const MetaFeatures m = rounded_for_display(meta);
  std::string out = fmt::format(
      "total_images={}, num_classes={}, class_imbalance_ratio={}, class_entropy={}, "
      "mean_class_size={}, std_class_size={}, min_class_size={}, max_class_size={}, "
      "modality={}",
      m.total_images, m.num_classes, format_shortest(m.class_imbalance_ratio),
      format_shortest(m.class_entropy), format_shortest(m.mean_class_size),
      format_shortest(m.std_class_size), m.min_class_size, m.max_class_size, m.modality);
  if (m.image_resolution) {
    out += fmt::format(", image_resolution={}x{}", m.image_resolution->width,
                       m.image_resolution->height);
  }
  return out;
}

inline std::string format_dataset_block(const MetaFeatures& meta) {
  const MetaFeatures m = rounded_for_display(meta);
  std::string out = "## Dataset Characteristics\n";
  out += fmt::format("- total_images: {}\n", m.total_images);
  out += fmt::format("- num_classes: {}\n", m.num_classes);
  out += fmt::format("- class_imbalance_ratio: {}\n", format_shortest(m.class_imbalance_ratio));
  out += fmt::format("- class_entropy: {}\n", format_shortest(m.class_entropy));
  out += fmt::format("- mean_class_size: {}\n", format_shortest(m.mean_class_size));
  out += fmt::format("- std_class_size: {}\n", format_shortest(m.std_class_size));
  out += fmt::format("- min_class_size: {}\n", m.min_class_size);
  out += fmt::format("- max_class_size: {}\n", m.max_class_size);
  out += fmt::format("- modality: {}", m.modality);
  if (m.image_resolution) {
    out += fmt::format("\n- image_resolution: {}x{}", m.image_resolution->width,
                       m.image_resolution->height);
  }
  return out;
}

inline std::string format_metrics_inline(const PerformanceMetrics& p) {
  return fmt::format("acc={}, f1={}, recall={}, precision={}, total_training_time={}",
                     format_shortest(p.acc), format_shortest(p.f1),
                     format_shortest(p.recall), format_shortest(p.precision),
                     format_shortest(p.total_training_time));
}

inline std::string format_config_inline(const HyperparameterConfig& c) {
  return fmt::format(
      R"({{"base_model": {}, "learning_rate": {}, "batch_size": {}, "dropout_rate": {}, "dense_units": {}, "optimizer": {}, "trainable_layers": {}}})",
      nlohmann::json(c.base_model).dump(), format_decimal(c.learning_rate), c.batch_size,
      format_decimal(c.dropout_rate), c.dense_units, nlohmann::json(c.optimizer).dump(),
      nlohmann::json(c.trainable_layers).dump());
}

inline std::string format_context_block(const RetrievedContext& context) {
  std::string out = fmt::format("## Context: {} Retrieved Experiments", context.size());
  for (std::size_t i = 0; i < context.size(); ++i) {
    const ContextEntry& e = context.entries[i];
    out += fmt::format("\n\n{}{}\n", kExperimentDelimiter, i + 1);
    out += fmt::format("dataset: {} (distance {:.4f})\n", e.record.dataset_name, e.distance);
    out += "meta: " + format_meta_inline(e.record.meta) + "\n";
    out += "config: " + format_config_inline(e.record.config) + "\n";
    out += "metrics: " + format_metrics_inline(e.record.metrics) + "\n";
    out += "top SHAP features: " +
           (e.top_features.entries.empty() ? std::string("n/a") : e.top_features.describe());
  }
  return out;
}

inline std::string format_search_space(const SearchSpace& s) {
  return fmt::format(
      "- base_model: {}\n- learning_rate: {}\n- batch_size: {}\n- dropout_rate: {}\n"
      "- dense_units: {}\n- optimizer: {}\n- trainable_layers: {}",
      detail::render_list(s.base_model), detail::render_list(s.learning_rate),
      detail::render_list(s.batch_size), detail::render_list(s.dropout_rate),
      detail::render_list(s.dense_units), detail::render_list(s.optimizer),
      detail::render_list(s.trainable_layers));
}

inline std::string key_list_literal() {
  return fmt::format("[{}]", fmt::join(recommendation_keys(), ", "));
}

inline std::string format_output_block(const SearchSpace& space) {
  std::string out;
  out += "## Search Space\n" + format_search_space(space) + "\n\n";
  out += std::string(kTaskText) + "\n\n";
  out += "Required keys: " + key_list_literal() + "\n\n";
  out += "## Output Format (strict)\n";
  out += "Reply with exactly one JSON object using the keys above, then a line "
         "\"Explanation:\" followed by your reasoning in plain text:\n\n";
  out += R"({
  "base_model": "...",
  "learning_rate": ...,
  "batch_size": ...,
  "dropout_rate": ...,
  "dense_units": ...,
  "optimizer": "...",
  "trainable_layers": "..."
}

Explanation:
[reasoning tied to the dataset characteristics, the SHAP summary and the retrieved experiments])";
  return out;
}

/// Assembles the recommendation prompt. Output depends only on the inputs.
inline PromptBundle build_prompt(const MetaFeatures& meta, std::string_view summary_text,
                                 const RetrievedContext& context, const SearchSpace& space) {
  if (context.empty()) {
    throw Error(ErrorCode::kEmptyContext, "no retrieved experiments to ground the prompt");
  }
  if (trim(summary_text).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "SHAP summary text is empty", "summary_text");
  }
  PromptBundle b;
  b.instruction = std::string(kInstructionBlock);
  b.dataset_block = format_dataset_block(meta);
  b.summary_block = "## SHAP Summary\n" + std::string(summary_text);
  b.context_block = format_context_block(context);
  b.format_block = format_output_block(space);
  const bool summary_ends_line = b.summary_block.back() == '\n';
  b.rendered = b.instruction + "\n\n" + b.dataset_block + "\n\n" + b.summary_block +
               (summary_ends_line ? "\n" : "\n\n") + b.context_block + "\n\n" + b.format_block + "\n";
  return b;
}

/// Corrective follow-up sent once when a reply fails to parse.
inline std::string build_correction_prompt(const PromptBundle& original,
                                           std::string_view previous_reply,
                                           std::string_view parser_error) {
  return original.rendered + "\n## Correction\nYour previous reply was rejected: " +
         std::string(parser_error) + "\nPrevious reply:\n" + std::string(previous_reply) +
         "\n\nAnswer again, following the output format exactly and using only values "
         "from the search space.\n";
}

}  // namespace metarec
