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
#include <cstddef>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/gbdt.hpp"

namespace metarec {

/// Per-feature Shapley values of one prediction.
/// base_value + sum(phi) == prediction up to rounding.
struct ShapAttribution {
  std::vector<double> phi;
  double base_value = 0.0;
  double prediction = 0.0;

  friend bool operator==(const ShapAttribution&, const ShapAttribution&) = default;
};

namespace detail {

// Polynomial-time path-dependent TreeSHAP. Each recursion level owns a
// segment of `path_` holding the unique features seen on the way down,
// with the fraction of zero (feature unknown) and one (feature known)
// paths flowing through them and their permutation weights.
class TreeShapRunner {
 public:
  TreeShapRunner(const RegressionTree& tree, std::span<const double> x,
                 std::span<double> phi, double scale)
      : tree_(tree), x_(x), phi_(phi), scale_(scale) {
    const auto max_depth = static_cast<std::size_t>(tree.depth()) + 2;
    path_.resize(max_depth * (max_depth + 1) / 2);
  }

  void run() { recurse(0, 0, 0, 1.0, 1.0, -1); }

 private:
  struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
  };

  void extend(std::size_t base, int depth, double zero_fraction, double one_fraction,
              int feature) {
    PathElement* p = path_.data() + base;
    p[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    const double denom = depth + 1;
    for (int i = depth - 1; i >= 0; --i) {
      p[i + 1].pweight += one_fraction * p[i].pweight * (i + 1) / denom;
      p[i].pweight = zero_fraction * p[i].pweight * (depth - i) / denom;
    }
  }

  void unwind(std::size_t base, int depth, int index) {
    PathElement* p = path_.data() + base;
    const double one = p[index].one_fraction;
    const double zero = p[index].zero_fraction;
    double next_one_portion = p[depth].pweight;
    const double denom = depth + 1;
    for (int i = depth - 1; i >= 0; --i) {
      if (one != 0.0) {
        const double tmp = p[i].pweight;
        p[i].pweight = next_one_portion * denom / ((i + 1) * one);
        next_one_portion = tmp - p[i].pweight * zero * (depth - i) / denom;
      } else {
        p[i].pweight = p[i].pweight * denom / (zero * (depth - i));
      }
    }
    for (int i = index; i < depth; ++i) {
      p[i].feature = p[i + 1].feature;
      p[i].zero_fraction = p[i + 1].zero_fraction;
      p[i].one_fraction = p[i + 1].one_fraction;
    }
  }

  // Total permutation weight if element `index` were unwound.
  double unwound_sum(std::size_t base, int depth, int index) const {
    const PathElement* p = path_.data() + base;
    const double one = p[index].one_fraction;
    const double zero = p[index].zero_fraction;
    double next_one_portion = p[depth].pweight;
    double total = 0.0;
    const double denom = depth + 1;
    for (int i = depth - 1; i >= 0; --i) {
      if (one != 0.0) {
        const double tmp = next_one_portion * denom / ((i + 1) * one);
        total += tmp;
        next_one_portion = p[i].pweight - tmp * zero * ((depth - i) / denom);
      } else if (zero != 0.0) {
        total += (p[i].pweight / zero) / ((depth - i) / denom);
      }
    }
    return total;
  }

  void recurse(int node_index, int depth, std::size_t parent_base, double zero_fraction,
               double one_fraction, int parent_feature) {
    const TreeNode& node = tree_.nodes[static_cast<std::size_t>(node_index)];
    const std::size_t base = parent_base + static_cast<std::size_t>(depth);
    std::copy_n(path_.begin() + static_cast<std::ptrdiff_t>(parent_base), depth,
                path_.begin() + static_cast<std::ptrdiff_t>(base));
    extend(base, depth, zero_fraction, one_fraction, parent_feature);

    if (node.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_sum(base, depth, i);
        const PathElement& el = path_[base + static_cast<std::size_t>(i)];
        phi_[static_cast<std::size_t>(el.feature)] +=
            w * (el.one_fraction - el.zero_fraction) * node.value * scale_;
      }
      return;
    }

    const bool go_left = x_[static_cast<std::size_t>(node.feature)] < node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double hot_zero = tree_.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
    const double cold_zero = tree_.nodes[static_cast<std::size_t>(cold)].cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature split on twice along a path is merged into one element.
    int path_index = 0;
    for (; path_index <= depth; ++path_index) {
      if (path_[base + static_cast<std::size_t>(path_index)].feature == node.feature) break;
    }
    if (path_index != depth + 1) {
      incoming_zero = path_[base + static_cast<std::size_t>(path_index)].zero_fraction;
      incoming_one = path_[base + static_cast<std::size_t>(path_index)].one_fraction;
      unwind(base, depth, path_index);
      depth -= 1;
    }

    recurse(hot, depth + 1, base, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, depth + 1, base, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const RegressionTree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
  double scale_;
  std::vector<PathElement> path_;
};

inline void check_tree_covers(const RegressionTree& tree, std::size_t index) {
  if (tree.nodes.empty()) {
    throw Error(ErrorCode::kModelCorrupt, fmt::format("tree {} has no nodes", index));
  }
  for (const auto& n : tree.nodes) {
    if (!(n.cover > 0.0)) {
      throw Error(ErrorCode::kModelCorrupt,
                  fmt::format("tree {} has a node with zero cover", index));
    }
  }
}

}  // namespace detail

/// Exact Shapley values under the cover-weighted (path-dependent)
/// conditional expectation, summed over trees with shrinkage applied.
inline ShapAttribution tree_shap(const GbdtModel& model, std::span<const double> x) {
  check_dimension(model, x.size());
  ShapAttribution out;
  out.phi.assign(x.size(), 0.0);
  double expected = 0.0;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const RegressionTree& tree = model.trees[t];
    detail::check_tree_covers(tree, t);
    expected += tree.expected_value();
    detail::TreeShapRunner(tree, x, out.phi, model.shrinkage).run();
  }
  out.base_value = model.base_score + model.shrinkage * expected;
  out.prediction = predict(model, x);
  return out;
}

inline ShapAttribution tree_shap(const GbdtModel& model, const FeatureVector& x) {
  return tree_shap(model, std::span<const double>(x.values));
}

/// One attribution per record, in record order.
inline std::vector<ShapAttribution> explain_dataset(const GbdtModel& model,
                                                    const MetaDataset& ds) {
  if (ds.empty()) {
    throw Error(ErrorCode::kInsufficientData, "cannot explain an empty dataset");
  }
  std::vector<ShapAttribution> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) {
    out.push_back(tree_shap(model, encode(r.meta, r.config, model.schema)));
  }
  return out;
}

}  // namespace metarec
