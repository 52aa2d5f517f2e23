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
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/shap_summary.hpp"

namespace metarec {

inline constexpr std::size_t kNumericMetaDims = 8;
inline constexpr std::size_t kDefaultTopK = 8;

inline const std::array<const char*, kNumericMetaDims>& numeric_meta_names() {
  static const std::array<const char*, kNumericMetaDims> names = {
      "total_images",    "num_classes",    "class_imbalance_ratio", "class_entropy",
      "mean_class_size", "std_class_size", "min_class_size",        "max_class_size"};
  return names;
}

inline std::array<double, kNumericMetaDims> numeric_meta(const MetaFeatures& m) {
  return {static_cast<double>(m.total_images),
          static_cast<double>(m.num_classes),
          m.class_imbalance_ratio,
          m.class_entropy,
          m.mean_class_size,
          m.std_class_size,
          static_cast<double>(m.min_class_size),
          static_cast<double>(m.max_class_size)};
}

/// Exact nearest-neighbour index over z-scored meta-features plus a
/// unit-weight modality one-hot block. Image resolution is not used.
class RetrievalIndex {
 public:
  static RetrievalIndex build(const MetaDataset& ds) {
    if (ds.empty()) {
      throw Error(ErrorCode::kInsufficientData, "cannot index an empty meta-dataset");
    }
    RetrievalIndex index;
    const auto n = static_cast<double>(ds.size());
    std::array<double, kNumericMetaDims> lo{};
    std::array<double, kNumericMetaDims> hi{};
    lo.fill(INFINITY);
    hi.fill(-INFINITY);
    for (const auto& r : ds.records) {
      const auto raw = numeric_meta(r.meta);
      for (std::size_t d = 0; d < kNumericMetaDims; ++d) {
        index.mean_[d] += raw[d];
        lo[d] = std::min(lo[d], raw[d]);
        hi[d] = std::max(hi[d], raw[d]);
      }
      if (std::find(index.modalities_.begin(), index.modalities_.end(),
                    r.meta.modality) == index.modalities_.end()) {
        index.modalities_.push_back(r.meta.modality);
      }
      index.record_ids_.push_back(r.record_id);
      index.dataset_names_.push_back(r.dataset_name);
    }
    for (std::size_t d = 0; d < kNumericMetaDims; ++d) index.mean_[d] /= n;
    for (const auto& r : ds.records) {
      const auto raw = numeric_meta(r.meta);
      for (std::size_t d = 0; d < kNumericMetaDims; ++d) {
        const double dev = raw[d] - index.mean_[d];
        index.std_[d] += dev * dev;
      }
    }
    for (std::size_t d = 0; d < kNumericMetaDims; ++d) {
      index.std_[d] = std::sqrt(index.std_[d] / n);
      // Constant dimensions carry no similarity signal.
      index.retained_[d] = lo[d] < hi[d] && index.std_[d] > 0.0;
    }
    index.vectors_.reserve(ds.size());
    for (const auto& r : ds.records) index.vectors_.push_back(index.represent(r.meta));
    return index;
  }

  /// Normalized representation of `meta` using the stored statistics.
  std::vector<double> represent(const MetaFeatures& meta) const {
    std::vector<double> v;
    v.reserve(dimension());
    const auto raw = numeric_meta(meta);
    for (std::size_t d = 0; d < kNumericMetaDims; ++d) {
      if (retained_[d]) v.push_back((raw[d] - mean_[d]) / std_[d]);
    }
    for (const auto& m : modalities_) v.push_back(m == meta.modality ? 1.0 : 0.0);
    return v;
  }

  std::size_t size() const { return vectors_.size(); }
  std::size_t dimension() const {
    return static_cast<std::size_t>(
               std::count(retained_.begin(), retained_.end(), true)) +
           modalities_.size();
  }
  std::size_t retained_numeric_dims() const {
    return static_cast<std::size_t>(std::count(retained_.begin(), retained_.end(), true));
  }
  const std::array<bool, kNumericMetaDims>& retained() const { return retained_; }
  const std::array<double, kNumericMetaDims>& means() const { return mean_; }
  const std::array<double, kNumericMetaDims>& stds() const { return std_; }
  const std::vector<std::string>& modalities() const { return modalities_; }
  const std::vector<std::vector<double>>& vectors() const { return vectors_; }
  const std::vector<std::int64_t>& record_ids() const { return record_ids_; }
  const std::vector<std::string>& dataset_names() const { return dataset_names_; }

  friend bool operator==(const RetrievalIndex&, const RetrievalIndex&) = default;

 private:
  std::array<double, kNumericMetaDims> mean_{};
  std::array<double, kNumericMetaDims> std_{};
  std::array<bool, kNumericMetaDims> retained_{};
  std::vector<std::string> modalities_;
  std::vector<std::vector<double>> vectors_;
  std::vector<std::int64_t> record_ids_;
  std::vector<std::string> dataset_names_;
};

inline RetrievalIndex build_index(const MetaDataset& ds) { return RetrievalIndex::build(ds); }

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct Neighbor {
  std::size_t position = 0;  // row in the indexed dataset
  std::int64_t record_id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct QueryOptions {
  /// Skip records of this dataset (leave-one-dataset-out evaluation).
  std::optional<std::string> exclude_dataset;
};

/// Exact k nearest neighbours, ties broken by ascending record id.
inline std::vector<Neighbor> query(const RetrievalIndex& index, const MetaFeatures& meta,
                                   std::size_t k = kDefaultTopK,
                                   const QueryOptions& options = {}) {
  if (index.size() == 0) {
    throw Error(ErrorCode::kInsufficientData, "query against an empty index");
  }
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1", "k");
  const std::vector<double> q = index.represent(meta);
  std::vector<Neighbor> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (options.exclude_dataset && index.dataset_names()[i] == *options.exclude_dataset) {
      continue;
    }
    all.push_back({i, index.record_ids()[i], euclidean(q, index.vectors()[i])});
  }
  const auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance ||
           (a.distance == b.distance && a.record_id < b.record_id);
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    by_distance);
  all.resize(take);
  return all;
}

struct ContextEntry {
  ExperimentRecord record;
  double distance = 0.0;
  LocalTopFeatures top_features;
};

/// Retrieved experiments in non-decreasing distance order.
struct RetrievedContext {
  std::vector<ContextEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Supplies the top local SHAP features of the record at a dataset row.
using LocalShapSource = std::function<LocalTopFeatures(std::size_t position)>;

inline RetrievedContext assemble_context(const std::vector<Neighbor>& neighbors,
                                         const MetaDataset& ds,
                                         const LocalShapSource& local_shap) {
  RetrievedContext ctx;
  for (const auto& nb : neighbors) {
    ctx.entries.push_back({ds.records.at(nb.position), nb.distance,
                           local_shap ? local_shap(nb.position) : LocalTopFeatures{}});
  }
  return ctx;
}

}  // namespace metarec
