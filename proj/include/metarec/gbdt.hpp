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
#include <fstream>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/feature_encoding.hpp"

namespace metarec {

/// Flat-array node. Leaves have feature == -1. A sample goes left iff
/// x[feature] < threshold. `cover` is the number of training samples that
/// reached the node.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  int depth() const { return nodes.empty() ? 0 : depth_from(0); }

  /// Cover-weighted mean leaf value, i.e. the output with no feature known.
  double expected_value() const { return nodes.empty() ? 0.0 : expected_from(0); }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  int depth_from(int i) const {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  double expected_from(int i) const {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return n.value;
    const TreeNode& l = nodes[static_cast<std::size_t>(n.left)];
    const TreeNode& r = nodes[static_cast<std::size_t>(n.right)];
    return (l.cover * expected_from(n.left) + r.cover * expected_from(n.right)) /
           n.cover;
  }
};

struct TrainParams {
  int num_rounds = 200;
  int max_depth = 4;
  int min_samples_leaf = 2;
  double shrinkage = 0.1;
  std::uint64_t seed = 42;  // no stochastic step consumes it today

  void validate() const {
    if (num_rounds < 1) {
      throw Error(ErrorCode::kInvalidArgument, "num_rounds must be >= 1", "num_rounds");
    }
    if (max_depth < 0) {
      throw Error(ErrorCode::kInvalidArgument, "max_depth must be >= 0", "max_depth");
    }
    if (min_samples_leaf < 1) {
      throw Error(ErrorCode::kInvalidArgument, "min_samples_leaf must be >= 1",
                  "min_samples_leaf");
    }
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "shrinkage must lie in (0, 1]",
                  "shrinkage");
    }
  }

  friend bool operator==(const TrainParams&, const TrainParams&) = default;
};

/// prediction(x) = base_score + shrinkage * sum_t tree_t(x)
struct GbdtModel {
  double base_score = 0.0;
  double shrinkage = 1.0;
  std::vector<RegressionTree> trees;
  std::shared_ptr<const FeatureSchema> schema;
  std::string target;
  TrainParams params;
  bool constant_target = false;  // training saw a constant target

  std::size_t num_features() const { return schema ? schema->size() : 0; }
};

/// Schema of `n` anonymous continuous features ("f0", "f1", ...).
inline std::shared_ptr<const FeatureSchema> anonymous_schema(std::size_t n) {
  auto schema = std::make_shared<FeatureSchema>();
  for (std::size_t i = 0; i < n; ++i) {
    schema->names.push_back("f" + std::to_string(i));
    schema->kinds.push_back(FeatureKind::kContinuous);
  }
  return schema;
}

inline void check_dimension(const GbdtModel& model, std::size_t n) {
  if (n != model.num_features()) {
    throw Error(ErrorCode::kDimensionError,
                fmt::format("input has {} features, model expects {}", n,
                            model.num_features()));
  }
}

inline double predict(const GbdtModel& model, std::span<const double> x) {
  check_dimension(model, x.size());
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.predict(x);
  return model.base_score + model.shrinkage * sum;
}

inline double predict(const GbdtModel& model, const FeatureVector& x) {
  return predict(model, std::span<const double>(x.values));
}

/// Dense row-major design matrix with targets.
struct TrainingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;

  double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {x.data() + r * cols, cols};
  }
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const TrainingMatrix& data, const std::vector<double>& residual,
              const TrainParams& params)
      : data_(data), residual_(residual), params_(params) {}

  RegressionTree build(std::vector<std::vector<int>> sorted) {
    tree_.nodes.clear();
    grow(std::move(sorted), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::vector<std::vector<int>> sorted, int depth) {
    const auto& members = sorted.front();
    const auto m = static_cast<double>(members.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i : members) {
      sum += residual_[static_cast<std::size_t>(i)];
      sum_sq += residual_[static_cast<std::size_t>(i)] * residual_[static_cast<std::size_t>(i)];
    }

    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes.back().cover = m;
    tree_.nodes.back().value = sum / m;

    if (depth >= params_.max_depth) return index;
    const double node_sse = sum_sq - sum * sum / m;
    if (!(node_sse > 0.0)) return index;
    const Split split = best_split(sorted, sum);
    if (split.feature < 0 || !(split.gain > 1e-12 * node_sse)) return index;

    std::vector<std::vector<int>> left(sorted.size());
    std::vector<std::vector<int>> right(sorted.size());
    const auto f = static_cast<std::size_t>(split.feature);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      for (int i : sorted[k]) {
        (data_.at(static_cast<std::size_t>(i), f) < split.threshold ? left[k] : right[k])
            .push_back(i);
      }
    }
    sorted.clear();
    sorted.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    node.value = 0.0;
    return index;
  }

  // Exhaustive scan; earlier (feature, threshold) wins ties.
  Split best_split(const std::vector<std::vector<int>>& sorted, double total) const {
    Split best;
    const std::size_t m = sorted.front().size();
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    const double base = total * total / static_cast<double>(m);
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const auto& order = sorted[f];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += residual_[static_cast<std::size_t>(order[i])];
        const std::size_t n_left = i + 1;
        const std::size_t n_right = m - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double lo = data_.at(static_cast<std::size_t>(order[i]), f);
        const double hi = data_.at(static_cast<std::size_t>(order[i + 1]), f);
        if (!(lo < hi)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) - base;
        if (gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;  // adjacent doubles
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const TrainingMatrix& data_;
  const std::vector<double>& residual_;
  const TrainParams& params_;
  RegressionTree tree_;
};

inline double mean_squared_error(const std::vector<double>& pred,
                                 const std::vector<double>& y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = pred[i] - y[i];
    sse += d * d;
  }
  return sse / static_cast<double>(y.size());
}

}  // namespace detail

struct TrainOutcome {
  GbdtModel model;
  /// round_mse[0] is the base-score-only MSE; round_mse[r] after r trees.
  std::vector<double> round_mse;
};

/// Least-squares gradient boosting on a dense matrix.
inline TrainOutcome train_matrix(const TrainingMatrix& data,
                                 std::shared_ptr<const FeatureSchema> schema,
                                 std::string target, const TrainParams& params) {
  params.validate();
  if (data.rows < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("training needs >= 2 records, got {}", data.rows));
  }
  if (!schema || schema->size() != data.cols) {
    throw Error(ErrorCode::kDimensionError, "schema does not match training matrix");
  }

  TrainOutcome out;
  GbdtModel& model = out.model;
  model.schema = std::move(schema);
  model.target = std::move(target);
  model.params = params;
  model.shrinkage = params.shrinkage;
  model.base_score =
      std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(data.rows);

  std::vector<double> pred(data.rows, model.base_score);
  out.round_mse.push_back(detail::mean_squared_error(pred, data.y));

  const bool constant =
      std::all_of(data.y.begin(), data.y.end(), [&](double v) { return v == data.y[0]; });
  if (constant) {
    model.constant_target = true;
    return out;
  }

  std::vector<std::vector<int>> presorted(data.cols);
  for (std::size_t f = 0; f < data.cols; ++f) {
    auto& order = presorted[f];
    order.resize(data.rows);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return data.at(static_cast<std::size_t>(a), f) < data.at(static_cast<std::size_t>(b), f);
    });
  }

  std::vector<double> residual(data.rows);
  for (int round = 0; round < params.num_rounds; ++round) {
    for (std::size_t i = 0; i < data.rows; ++i) residual[i] = data.y[i] - pred[i];
    detail::TreeBuilder builder(data, residual, params);
    RegressionTree tree = builder.build(presorted);
    for (std::size_t i = 0; i < data.rows; ++i) {
      pred[i] += model.shrinkage * tree.predict(data.row(i));
    }
    model.trees.push_back(std::move(tree));
    out.round_mse.push_back(detail::mean_squared_error(pred, data.y));
  }
  return out;
}

inline TrainingMatrix training_matrix(const MetaDataset& ds,
                                      const std::shared_ptr<const FeatureSchema>& schema,
                                      std::string_view target) {
  TrainingMatrix data;
  data.rows = ds.size();
  data.cols = schema->size();
  data.x.reserve(data.rows * data.cols);
  data.y.reserve(data.rows);
  for (const auto& r : ds.records) {
    const FeatureVector v = encode(r.meta, r.config, schema);
    data.x.insert(data.x.end(), v.values.begin(), v.values.end());
    data.y.push_back(metric_value(r.metrics, target));
  }
  return data;
}

/// Trains on a meta-dataset; categorical codes are frozen from first-seen
/// order over `ds`.
inline TrainOutcome train_with_trace(const MetaDataset& ds, const std::string& target,
                                     const TrainParams& params = {}) {
  if (!is_metric_name(target)) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown target metric '" + target + "'", target);
  }
  params.validate();
  if (ds.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("training needs >= 2 records, got {}", ds.size()));
  }
  auto schema =
      std::make_shared<const FeatureSchema>(standard_schema(build_encoding_table(ds)));
  TrainingMatrix data = training_matrix(ds, schema, target);
  return train_matrix(data, schema, target, params);
}

inline GbdtModel train(const MetaDataset& ds, const std::string& target,
                       const TrainParams& params = {}) {
  return train_with_trace(ds, target, params).model;
}

inline double evaluate(const GbdtModel& model, const MetaDataset& ds,
                       const std::string& target) {
  if (ds.empty()) {
    throw Error(ErrorCode::kInsufficientData, "cannot evaluate on an empty dataset");
  }
  double sse = 0.0;
  for (const auto& r : ds.records) {
    const double d = predict(model, encode(r.meta, r.config, model.schema)) -
                     metric_value(r.metrics, target);
    sse += d * d;
  }
  return sse / static_cast<double>(ds.size());
}

// --- persistence ---------------------------------------------------------

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kContinuous: return "continuous";
    case FeatureKind::kDiscrete: return "discrete";
    case FeatureKind::kCategorical: return "categorical";
  }
  return "continuous";
}

inline FeatureKind feature_kind_from(std::string_view s) {
  if (s == "continuous") return FeatureKind::kContinuous;
  if (s == "discrete") return FeatureKind::kDiscrete;
  if (s == "categorical") return FeatureKind::kCategorical;
  throw Error(ErrorCode::kModelCorrupt, "unknown feature kind '" + std::string(s) + "'");
}

inline nlohmann::json model_to_json(const GbdtModel& model) {
  nlohmann::json j;
  j["format"] = "metarec-gbdt";
  j["version"] = 1;
  j["target"] = model.target;
  j["base_score"] = model.base_score;
  j["shrinkage"] = model.shrinkage;
  j["constant_target"] = model.constant_target;
  j["params"] = {{"num_rounds", model.params.num_rounds},
                 {"max_depth", model.params.max_depth},
                 {"min_samples_leaf", model.params.min_samples_leaf},
                 {"shrinkage", model.params.shrinkage},
                 {"seed", model.params.seed}};
  nlohmann::json features = nlohmann::json::array();
  nlohmann::json encoding = nlohmann::json::object();
  if (model.schema) {
    for (std::size_t i = 0; i < model.schema->size(); ++i) {
      features.push_back({{"name", model.schema->names[i]},
                          {"kind", to_string(model.schema->kinds[i])}});
    }
    for (const auto& [feature, labels] : model.schema->table.entries()) {
      encoding[feature] = labels;
    }
  }
  j["features"] = std::move(features);
  j["encoding"] = std::move(encoding);
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.cover});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline GbdtModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "metarec-gbdt" || j.at("version") != 1) {
      throw Error(ErrorCode::kModelCorrupt, "not a metarec-gbdt v1 document");
    }
    GbdtModel model;
    model.target = j.at("target").get<std::string>();
    model.base_score = j.at("base_score").get<double>();
    model.shrinkage = j.at("shrinkage").get<double>();
    model.constant_target = j.at("constant_target").get<bool>();
    const auto& p = j.at("params");
    model.params.num_rounds = p.at("num_rounds").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    model.params.shrinkage = p.at("shrinkage").get<double>();
    model.params.seed = p.at("seed").get<std::uint64_t>();

    auto schema = std::make_shared<FeatureSchema>();
    for (const auto& f : j.at("features")) {
      schema->names.push_back(f.at("name").get<std::string>());
      schema->kinds.push_back(feature_kind_from(f.at("kind").get<std::string>()));
    }
    for (auto it = j.at("encoding").begin(); it != j.at("encoding").end(); ++it) {
      for (const auto& label : it.value()) {
        schema->table.observe(it.key(), label.get<std::string>());
      }
    }
    model.schema = std::move(schema);

    const auto n_features = static_cast<int>(model.schema->size());
    for (const auto& nodes : j.at("trees")) {
      RegressionTree tree;
      for (const auto& n : nodes) {
        tree.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(),
                                      n.at(2).get<int>(), n.at(3).get<int>(),
                                      n.at(4).get<double>(), n.at(5).get<double>()});
      }
      const auto size = static_cast<int>(tree.nodes.size());
      if (size == 0) throw Error(ErrorCode::kModelCorrupt, "empty tree");
      // Children always follow their parent, which also rules out cycles.
      for (int i = 0; i < size; ++i) {
        const TreeNode& n = tree.nodes[static_cast<std::size_t>(i)];
        if (!n.is_leaf() && (n.feature >= n_features || n.left <= i || n.right <= i ||
                             n.left >= size || n.right >= size)) {
          throw Error(ErrorCode::kModelCorrupt, "tree node references out of range");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kModelCorrupt, std::string("malformed model: ") + e.what());
  }
}

inline void save_model(const GbdtModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

inline GbdtModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace metarec
