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
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/feature_encoding.hpp"
#include "metarec/gbdt.hpp"
#include "metarec/tree_shap.hpp"

namespace metarec {

/// Product-moment correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> xs,
                                     std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::kDimensionError,
                fmt::format("pearson needs two equal-length series of >= 2 values "
                            "(got {} and {})",
                            xs.size(), ys.size()));
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  // The summed mean of a constant series can be off by an ulp, so test exactly.
  if (constant(xs) || constant(ys)) return std::nullopt;
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

struct GroupEffect {
  std::string label;
  double value = 0.0;  // raw feature value (category code for categoricals)
  double mean_shap = 0.0;
  std::size_t support = 0;
};

struct FeatureEffect {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<GroupEffect> groups;   // empty for continuous features
  std::optional<double> correlation;  // numeric features only
  double mean_shap = 0.0;
  double mean_abs_shap = 0.0;
};

/// Global view of attributions over a set of records.
struct ShapSummary {
  std::string target;
  std::size_t num_records = 0;
  std::vector<FeatureEffect> features;      // schema order
  std::vector<std::size_t> importance_order;  // by mean |SHAP| descending
};

/// Groups SHAP values by feature value and correlates numeric features with
/// their attributions. `vectors[i]` is the input explained by `attributions[i]`.
inline ShapSummary aggregate(std::span<const ShapAttribution> attributions,
                             std::span<const FeatureVector> vectors,
                             std::string target = {}) {
  if (attributions.size() != vectors.size()) {
    throw Error(ErrorCode::kDimensionError,
                fmt::format("{} attributions for {} records", attributions.size(),
                            vectors.size()));
  }
  if (vectors.empty()) {
    throw Error(ErrorCode::kInsufficientData, "nothing to aggregate");
  }
  const FeatureSchema& schema = *vectors.front().schema;
  const std::size_t d = schema.size();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d || attributions[i].phi.size() != d) {
      throw Error(ErrorCode::kDimensionError,
                  fmt::format("record {} does not have {} features", i, d));
    }
  }

  ShapSummary summary;
  summary.target = std::move(target);
  summary.num_records = vectors.size();
  const auto n = static_cast<double>(vectors.size());
  for (std::size_t f = 0; f < d; ++f) {
    FeatureEffect effect;
    effect.name = schema.names[f];
    effect.kind = schema.kinds[f];
    std::vector<double> xs(vectors.size());
    std::vector<double> ys(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      xs[i] = vectors[i].values[f];
      ys[i] = attributions[i].phi[f];
      effect.mean_shap += ys[i];
      effect.mean_abs_shap += std::abs(ys[i]);
    }
    effect.mean_shap /= n;
    effect.mean_abs_shap /= n;

    if (effect.kind != FeatureKind::kContinuous) {
      std::map<double, std::pair<double, std::size_t>> groups;  // value -> (sum, count)
      for (std::size_t i = 0; i < xs.size(); ++i) {
        auto& g = groups[xs[i]];
        g.first += ys[i];
        g.second += 1;
      }
      for (const auto& [value, acc] : groups) {
        effect.groups.push_back({schema.value_label(f, value), value,
                                 acc.first / static_cast<double>(acc.second),
                                 acc.second});
      }
    }
    if (effect.kind != FeatureKind::kCategorical && xs.size() >= 2) {
      effect.correlation = pearson(xs, ys);
    }
    summary.features.push_back(std::move(effect));
  }

  summary.importance_order.resize(d);
  std::iota(summary.importance_order.begin(), summary.importance_order.end(), 0);
  std::stable_sort(summary.importance_order.begin(), summary.importance_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return summary.features[a].mean_abs_shap >
                            summary.features[b].mean_abs_shap;
                   });
  return summary;
}

/// Convenience overload that encodes `ds` with the model's schema.
inline ShapSummary aggregate(std::span<const ShapAttribution> attributions,
                             const MetaDataset& ds, const GbdtModel& model) {
  return aggregate(attributions, encode_dataset(ds, model.schema), model.target);
}

struct LocalFeature {
  std::string name;
  double value = 0.0;
  std::string label;  // decoded value
  double shap = 0.0;

  friend bool operator==(const LocalFeature&, const LocalFeature&) = default;
};

/// Most influential features of one prediction, by |SHAP| descending.
struct LocalTopFeatures {
  std::vector<LocalFeature> entries;

  std::string describe() const {
    std::vector<std::string> parts;
    for (const auto& e : entries) {
      parts.push_back(fmt::format("{}={} ({:+.4f})", e.name, e.label, e.shap));
    }
    return fmt::format("{}", fmt::join(parts, "; "));
  }

  friend bool operator==(const LocalTopFeatures&, const LocalTopFeatures&) = default;
};

inline LocalTopFeatures top_local_features(const ShapAttribution& attribution,
                                           std::span<const std::string> names,
                                           std::span<const double> values,
                                           std::size_t k = 3,
                                           const FeatureSchema* schema = nullptr) {
  const std::size_t d = attribution.phi.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(attribution.phi[a]) > std::abs(attribution.phi[b]);
  });
  LocalTopFeatures out;
  for (std::size_t i = 0; i < std::min(k, d); ++i) {
    const std::size_t f = order[i];
    const double v = f < values.size() ? values[f] : 0.0;
    out.entries.push_back({f < names.size() ? names[f] : fmt::format("f{}", f), v,
                           schema ? schema->value_label(f, v) : format_shortest(v),
                           attribution.phi[f]});
  }
  return out;
}

inline LocalTopFeatures top_local_features(const ShapAttribution& attribution,
                                           const FeatureVector& x, std::size_t k = 3) {
  return top_local_features(attribution, x.names(), x.values, k, x.schema.get());
}

// --- rendering -------------------------------------------------------------

inline std::string display_name(std::string_view feature) {
  static const std::map<std::string, std::string, std::less<>> names = {
      {"total_images", "Total Images"},
      {"num_classes", "Number of Classes"},
      {"class_imbalance_ratio", "Class Imbalance Ratio"},
      {"class_entropy", "Class Entropy"},
      {"mean_class_size", "Mean Class Size"},
      {"std_class_size", "Class Size Std"},
      {"min_class_size", "Min Class Size"},
      {"max_class_size", "Max Class Size"},
      {"modality", "Imaging Modality"},
      {"base_model", "Model Architecture"},
      {"learning_rate", "Learning Rate"},
      {"batch_size", "Batch Size"},
      {"dropout_rate", "Dropout Rate"},
      {"dense_units", "Dense Units"},
      {"optimizer", "Optimizer"},
      {"trainable_layers", "Fine-tuning Strategy"},
  };
  auto it = names.find(feature);
  return it == names.end() ? std::string(feature) : it->second;
}

inline std::string target_display_name(std::string_view target) {
  if (target == "acc") return "Test Accuracy";
  if (target == "f1") return "F1 Score";
  if (target == "recall") return "Recall";
  if (target == "precision") return "Precision";
  if (target == "total_training_time") return "Training Time";
  return target.empty() ? "Model Performance" : std::string(target);
}

namespace detail {

inline std::string join_groups(const std::vector<const GroupEffect*>& groups) {
  std::vector<std::string> parts;
  for (const auto* g : groups) {
    parts.push_back(fmt::format("{} ({:+.3f})", g->label, g->mean_shap));
  }
  if (parts.size() == 1) return parts[0];
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

inline std::string correlation_note(const std::optional<double>& r) {
  if (!r) return "correlation with SHAP undefined (constant values)";
  const char* direction = *r > 0.0   ? "higher values raise the prediction"
                          : *r < 0.0 ? "higher values lower the prediction"
                                     : "no linear trend";
  return fmt::format("correlation with SHAP r = {:+.3f} ({})", *r, direction);
}

}  // namespace detail

/// Number of strongest groups listed per direction.
inline constexpr std::size_t kGroupsPerDirection = 2;
/// Half a unit in the third decimal, the printed precision.
inline constexpr double kNegligibleShap = 5e-4;

/// Deterministic markdown summary, one line per feature in importance order.
inline std::string render_summary(const ShapSummary& summary) {
  std::string out = fmt::format("# SHAP Analysis Summary: Hyperparameter Effects on {}\n",
                                target_display_name(summary.target));
  for (std::size_t f : summary.importance_order) {
    const FeatureEffect& e = summary.features[f];
    std::string line = fmt::format("\n**{}**: ", display_name(e.name));
    if (e.kind == FeatureKind::kContinuous) {
      line += fmt::format("{}; mean |SHAP| {:.3f}.", detail::correlation_note(e.correlation),
                          e.mean_abs_shap);
    } else {
      std::vector<const GroupEffect*> pos;
      std::vector<const GroupEffect*> neg;
      // Groups that print as +/-0.000 are not called out.
      for (const auto& g : e.groups) {
        if (g.mean_shap >= kNegligibleShap) pos.push_back(&g);
        if (g.mean_shap <= -kNegligibleShap) neg.push_back(&g);
      }
      std::stable_sort(pos.begin(), pos.end(), [](auto* a, auto* b) {
        return a->mean_shap > b->mean_shap;
      });
      std::stable_sort(neg.begin(), neg.end(), [](auto* a, auto* b) {
        return a->mean_shap < b->mean_shap;
      });
      if (pos.size() > kGroupsPerDirection) pos.resize(kGroupsPerDirection);
      if (neg.size() > kGroupsPerDirection) neg.resize(kGroupsPerDirection);

      if (!pos.empty()) {
        line += fmt::format("{} {} strong positive effects", detail::join_groups(pos),
                            pos.size() == 1 ? "shows" : "show");
      }
      if (!neg.empty()) {
        line += pos.empty() ? "" : ", while ";
        line += fmt::format("{} {} poorly", detail::join_groups(neg),
                            neg.size() == 1 ? "performs" : "perform");
      }
      if (pos.empty() && neg.empty()) line += "no measurable effect";
      line += ".";
      if (e.kind == FeatureKind::kDiscrete) {
        const std::string note = detail::correlation_note(e.correlation);
        line += " " + std::string(1, static_cast<char>(std::toupper(note[0]))) +
                note.substr(1) + ".";
      }
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace metarec
