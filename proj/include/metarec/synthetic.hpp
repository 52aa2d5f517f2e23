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
#include <random>
#include <string>
#include <vector>

#include "metarec/dataset.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/search_space.hpp"

namespace metarec {

struct SyntheticOptions {
  std::size_t num_records = 200;
  std::size_t num_datasets = 8;
  std::uint64_t seed = 7;
  double noise = 0.02;
};

/// Plausible meta-dataset for demos and tests: accuracy responds to the
/// backbone, learning rate, fine-tuning depth and dataset difficulty, plus
/// Gaussian noise. Deterministic for a given seed.
inline MetaDataset make_synthetic_dataset(const SyntheticOptions& opt,
                                          const SearchSpace& space = SearchSpace::standard()) {
  std::mt19937_64 rng(opt.seed);
  auto pick = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  const std::vector<std::string> modalities = {"MRI", "CT", "X-ray", "US", "DMS", "OCT"};

  struct Source {
    std::string name;
    MetaFeatures meta;
    double difficulty;
  };
  std::vector<Source> sources;
  for (std::size_t d = 0; d < std::max<std::size_t>(opt.num_datasets, 1); ++d) {
    const auto classes = 2 + pick(7);
    std::map<std::string, std::int64_t> counts;
    for (std::size_t c = 0; c < classes; ++c) {
      counts["class_" + std::to_string(c)] =
          std::uniform_int_distribution<std::int64_t>(40, 2500)(rng);
    }
    MetaFeatures meta = compute_meta_features(counts, modalities[pick(modalities.size())]);
    const double difficulty = 0.04 * static_cast<double>(classes) +
                              0.03 * std::log(meta.class_imbalance_ratio);
    sources.push_back({"synth_" + std::to_string(d), rounded_for_display(meta), difficulty});
  }

  std::normal_distribution<double> noise(0.0, opt.noise);
  MetaDataset ds;
  ds.provenance = {"synthetic", ""};
  for (std::size_t i = 0; i < opt.num_records; ++i) {
    const Source& src = sources[pick(sources.size())];
    HyperparameterConfig c;
    const std::size_t model_idx = pick(space.base_model.size());
    c.base_model = space.base_model[model_idx];
    const std::size_t lr_idx = pick(space.learning_rate.size());
    c.learning_rate = space.learning_rate[lr_idx];
    c.batch_size = space.batch_size[pick(space.batch_size.size())];
    c.dropout_rate = space.dropout_rate[pick(space.dropout_rate.size())];
    c.dense_units = space.dense_units[pick(space.dense_units.size())];
    c.optimizer = space.optimizer[pick(space.optimizer.size())];
    const std::size_t tl_idx = pick(space.trainable_layers.size());
    c.trainable_layers = space.trainable_layers[tl_idx];

    const double model_effect =
        0.06 * std::sin(1.7 * static_cast<double>(model_idx) + 0.3);
    const double lr_effect = lr_idx == 1 ? 0.05 : (lr_idx == 0 ? -0.02 : -0.04);
    const double tl_effect = 0.02 * static_cast<double>(tl_idx);
    const double opt_effect = c.optimizer == "adam" ? 0.02 : 0.0;
    double acc = 0.78 + model_effect + lr_effect + tl_effect + opt_effect - src.difficulty +
                 noise(rng);
    acc = std::clamp(acc, 0.05, 0.995);

    ExperimentRecord r;
    r.dataset_name = src.name;
    r.meta = src.meta;
    r.config = c;
    auto rate = [&](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 1000.0) / 1000.0; };
    r.metrics.acc = rate(acc);
    r.metrics.f1 = rate(acc - 0.01 + noise(rng) * 0.2);
    r.metrics.recall = rate(acc + noise(rng) * 0.2);
    r.metrics.precision = rate(acc - 0.005 + noise(rng) * 0.2);
    const double time = static_cast<double>(src.meta.total_images) / 40.0 *
                        (1.0 + 0.3 * static_cast<double>(model_idx % 3)) *
                        (32.0 / static_cast<double>(c.batch_size)) *
                        (1.0 + 0.5 * static_cast<double>(tl_idx));
    r.metrics.total_training_time = std::round(std::max(time, 1.0) * 1000.0) / 1000.0;
    r.record_id = static_cast<std::int64_t>(i);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace metarec
