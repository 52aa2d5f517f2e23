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

#include <gtest/gtest.h>

#include <filesystem>

#include "metarec.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace metarec {
namespace {

TrainingMatrix random_matrix(testing::Rng& rng, std::size_t rows, std::size_t cols,
                             int distinct_values = 0) {
  TrainingMatrix m;
  m.rows = rows;
  m.cols = cols;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    m.x.push_back(distinct_values > 0 ? testing::uniform_int(rng, 0, distinct_values - 1)
                                      : testing::uniform_real(rng, -1.0, 1.0));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    m.y.push_back(std::sin(3.0 * m.at(r, 0)) + 0.5 * m.at(r, cols - 1) +
                  testing::uniform_real(rng, -0.1, 0.1));
  }
  return m;
}

// Lowest left+right SSE over every (feature, midpoint) candidate, computed
// directly from the partition.
struct StumpChoice {
  int feature = -1;
  double sse = 0.0;
};

StumpChoice exhaustive_stump(const TrainingMatrix& m, const std::vector<double>& y, int min_leaf) {
  auto sse_of = [&](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return testing::variance(v) * static_cast<double>(v.size());
  };
  StumpChoice best{-1, sse_of(y)};
  for (std::size_t f = 0; f < m.cols; ++f) {
    std::vector<double> values;
    for (std::size_t r = 0; r < m.rows; ++r) values.push_back(m.at(r, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = (values[i] + values[i + 1]) / 2.0;
      std::vector<double> left, right;
      for (std::size_t r = 0; r < m.rows; ++r) (m.at(r, f) < t ? left : right).push_back(y[r]);
      if (static_cast<int>(left.size()) < min_leaf || static_cast<int>(right.size()) < min_leaf) continue;
      const double s = sse_of(left) + sse_of(right);
      if (s < best.sse - 1e-12) best = {static_cast<int>(f), s};
    }
  }
  return best;
}

TEST(Gbdt, FirstStumpMatchesExhaustiveSearch) {
  testing::Rng rng(21);
  TrainParams p;
  p.num_rounds = 1;
  p.max_depth = 1;
  p.shrinkage = 1.0;
  p.min_samples_leaf = 1;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_matrix(rng, static_cast<std::size_t>(testing::uniform_int(rng, 4, 40)),
                                 static_cast<std::size_t>(testing::uniform_int(rng, 1, 4)));
    const auto model = train_matrix(m, anonymous_schema(m.cols), "y", p).model;
    const StumpChoice oracle = exhaustive_stump(m, m.y, 1);
    ASSERT_EQ(model.trees.size(), 1u);
    const TreeNode& root = model.trees[0].nodes[0];
    ASSERT_EQ(root.feature, oracle.feature) << "trial " << trial;
    double sse = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double d = predict(model, m.row(r)) - m.y[r];
      sse += d * d;
    }
    EXPECT_NEAR(sse, oracle.sse, 1e-9);
  }
}

TEST(Gbdt, StepFunctionFitExactly) {
  TrainingMatrix m;
  m.rows = 6;
  m.cols = 1;
  m.x = {1, 2, 3, 4, 5, 6};
  m.y = {0, 0, 0, 1, 1, 1};
  TrainParams p;
  p.num_rounds = 1;
  p.max_depth = 1;
  p.shrinkage = 1.0;
  p.min_samples_leaf = 1;
  const auto model = train_matrix(m, anonymous_schema(1), "y", p).model;
  const TreeNode& root = model.trees[0].nodes[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_EQ(root.threshold, 3.5);
  EXPECT_EQ(root.cover, 6.0);
  for (std::size_t r = 0; r < m.rows; ++r) EXPECT_NEAR(predict(model, m.row(r)), m.y[r], 1e-15);
}

TEST(Gbdt, MinLeafRespected) {
  testing::Rng rng(22);
  TrainParams p;
  p.min_samples_leaf = 5;
  p.num_rounds = 20;
  const auto m = random_matrix(rng, 60, 3);
  const auto model = train_matrix(m, anonymous_schema(3), "y", p).model;
  for (const auto& t : model.trees) {
    EXPECT_LE(t.depth(), p.max_depth);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) EXPECT_GE(n.cover, 5.0);
      else EXPECT_EQ(t.nodes[static_cast<std::size_t>(n.left)].cover +
                         t.nodes[static_cast<std::size_t>(n.right)].cover,
                     n.cover);
    }
  }
}

TEST(Gbdt, ConstantTargetGivesBaseOnlyModel) {
  TrainingMatrix m;
  m.rows = 4;
  m.cols = 2;
  m.x = {1, 2, 3, 4, 5, 6, 7, 8};
  m.y = {0.7, 0.7, 0.7, 0.7};
  const auto out = train_matrix(m, anonymous_schema(2), "acc", {});
  EXPECT_TRUE(out.model.constant_target);
  EXPECT_TRUE(out.model.trees.empty());
  EXPECT_EQ(predict(out.model, std::vector<double>{9, 9}), 0.7);
}

TEST(Gbdt, TooFewRecords) {
  TrainingMatrix m;
  m.rows = 1;
  m.cols = 1;
  m.x = {1};
  m.y = {1};
  try {
    train_matrix(m, anonymous_schema(1), "y", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(Gbdt, InvalidParams) {
  TrainParams p;
  p.shrinkage = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.num_rounds = 0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.min_samples_leaf = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Gbdt, UnknownTargetRejected) {
  const auto ds = make_synthetic_dataset({.num_records = 10});
  try {
    train(ds, "auc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Gbdt, DimensionMismatch) {
  const auto model = train(make_synthetic_dataset({.num_records = 20}), "acc");
  try {
    predict(model, std::vector<double>(3, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionError);
  }
}

TEST(Gbdt, Deterministic) {
  const auto ds = make_synthetic_dataset({.num_records = 80});
  const auto a = train(ds, "acc");
  const auto b = train(ds, "acc");
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(a.base_score, b.base_score);
}

TEST(Gbdt, LearnsSyntheticSignal) {
  const auto ds = make_synthetic_dataset({.num_records = 300});
  const auto out = train_with_trace(ds, "acc");
  EXPECT_LT(out.round_mse.back(), 0.2 * out.round_mse.front());
  EXPECT_EQ(out.round_mse.size(), 201u);
  EXPECT_NEAR(evaluate(out.model, ds, "acc"), out.round_mse.back(), 1e-12);
}

TEST(GbdtProperty, TrainingMseNeverIncreases) {
  testing::Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = testing::random_meta_dataset(rng, testing::uniform_int(rng, 20, 120), 4);
    const auto out = train_with_trace(ds, "acc");
    for (std::size_t r = 1; r < out.round_mse.size(); ++r) {
      ASSERT_LE(out.round_mse[r], out.round_mse[r - 1]) << "trial " << trial << " round " << r;
    }
  }
}

TEST(GbdtPersistence, JsonRoundTripPredictsIdentically) {
  const auto ds = make_synthetic_dataset({.num_records = 120});
  const auto model = train(ds, "f1");
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(model).dump()));
  EXPECT_EQ(back.trees, model.trees);
  EXPECT_EQ(back.target, "f1");
  EXPECT_EQ(*back.schema, *model.schema);
  for (const auto& r : ds.records) {
    const auto v = encode(r.meta, r.config, model.schema);
    EXPECT_EQ(predict(back, v.values), predict(model, v.values));
  }
  const auto path = std::filesystem::temp_directory_path() / "metarec_model_roundtrip.json";
  save_model(model, path.string());
  EXPECT_EQ(load_model(path.string()).trees, model.trees);
  std::filesystem::remove(path);
}

TEST(GbdtPersistence, CorruptDocumentsRejected) {
  const auto model = train(make_synthetic_dataset({.num_records = 30}), "acc");
  const nlohmann::json good = model_to_json(model);
  auto expect_corrupt = [](const nlohmann::json& j) {
    try {
      model_from_json(j);
      ADD_FAILURE() << "accepted: " << j.dump().substr(0, 200);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kModelCorrupt);
    }
  };
  expect_corrupt(nlohmann::json::object());
  auto j = good;
  j["format"] = "something-else";
  expect_corrupt(j);
  j = good;
  j["trees"][0][0][2] = 999;  // child index out of range
  expect_corrupt(j);
  j = good;
  j.erase("base_score");
  expect_corrupt(j);
}

}  // namespace
}  // namespace metarec
