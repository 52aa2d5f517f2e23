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

#include "metarec.hpp"
#include "support/generators.hpp"

namespace metarec {
namespace {

HyperparameterConfig brain_config() {
  return {"ResNet50", 1e-4, 32, 0.4, 1024, "sgd", "last_10"};
}

TEST(SearchSpace, StandardSpaceIsWellFormed) {
  const SearchSpace s = SearchSpace::standard();
  EXPECT_NO_THROW(s.check_well_formed());
  EXPECT_EQ(s.base_model.size(), 7u);
  EXPECT_EQ(s.learning_rate, (std::vector<double>{1e-5, 1e-4, 1e-3}));
  EXPECT_EQ(s.batch_size, (std::vector<std::int64_t>{16, 32, 64}));
  EXPECT_EQ(s.dropout_rate, (std::vector<double>{0.3, 0.4, 0.5}));
  EXPECT_EQ(s.dense_units, (std::vector<std::int64_t>{512, 1024, 1536}));
  EXPECT_EQ(s.optimizer, (std::vector<std::string>{"adam", "sgd", "rmsprop"}));
  EXPECT_EQ(s.trainable_layers.size(), 4u);
}

TEST(SearchSpace, PublishedConfigIsAdmissible) {
  EXPECT_TRUE(validate_config(brain_config(), SearchSpace::standard()).ok());
}

TEST(SearchSpace, EachViolationIsReported) {
  const SearchSpace s = SearchSpace::standard();
  auto check = [&](HyperparameterConfig c, const std::string& parameter) {
    const ValidationResult r = validate_config(c, s);
    ASSERT_EQ(r.violations.size(), 1u) << parameter;
    EXPECT_EQ(r.violations[0].parameter, parameter);
    EXPECT_NE(r.describe().find(parameter), std::string::npos);
  };
  auto c = brain_config();
  c.base_model = "VGG16";
  check(c, "base_model");
  c = brain_config();
  c.learning_rate = 0.01;
  check(c, "learning_rate");
  c = brain_config();
  c.batch_size = 128;
  check(c, "batch_size");
  c = brain_config();
  c.dropout_rate = 0.2;
  check(c, "dropout_rate");
  c = brain_config();
  c.dense_units = 256;
  check(c, "dense_units");
  c = brain_config();
  c.optimizer = "adagrad";
  check(c, "optimizer");
  c = brain_config();
  c.trainable_layers = "last_20";
  check(c, "trainable_layers");
}

TEST(SearchSpace, RelativeToleranceOnReals) {
  auto c = brain_config();
  c.learning_rate = 1e-4 * (1 + 1e-12);
  EXPECT_TRUE(validate_config(c, SearchSpace::standard()).ok());
  c.learning_rate = 1e-4 * (1 + 1e-6);
  EXPECT_FALSE(validate_config(c, SearchSpace::standard()).ok());
}

TEST(SearchSpace, MalformedSpaceRejected) {
  SearchSpace s = SearchSpace::standard();
  s.batch_size.clear();
  EXPECT_THROW(s.check_well_formed(), Error);
  s = SearchSpace::standard();
  s.optimizer.push_back("adam");
  EXPECT_THROW(s.check_well_formed(), Error);
}

TEST(SearchSpace, ConfigDistanceCountsFields) {
  auto a = brain_config();
  auto b = a;
  EXPECT_EQ(config_distance(a, b), 0);
  b.batch_size = 64;
  EXPECT_EQ(config_distance(a, b), 1);
  b.optimizer = "adam";
  b.base_model = "Xception";
  EXPECT_EQ(config_distance(a, b), 3);
}

TEST(SearchSpaceProperty, RandomConfigsAreAdmissible) {
  testing::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    EXPECT_TRUE(validate_config(testing::random_config(rng), SearchSpace::standard()).ok());
  }
}

TEST(Metrics, LookupByName) {
  PerformanceMetrics m{0.741, 0.746, 0.746, 0.744, 76.818};
  EXPECT_EQ(metric_value(m, "acc"), 0.746);
  EXPECT_EQ(metric_value(m, "f1"), 0.741);
  EXPECT_EQ(metric_value(m, "total_training_time"), 76.818);
  EXPECT_FALSE(is_metric_name("auc"));
  EXPECT_THROW(metric_value(m, "auc"), Error);
}

TEST(Encoding, FixedOrderAndFirstSeenCodes) {
  EncodingTable table;
  const MetaFeatures meta = compute_meta_features({{"a", 926}, {"b", 937}, {"c", 901}, {"d", 500}}, "MRI");
  observe_labels(table, meta, brain_config());
  auto other = brain_config();
  other.base_model = "Xception";
  observe_labels(table, meta, other);
  const auto schema = std::make_shared<const FeatureSchema>(standard_schema(table));
  ASSERT_EQ(schema->size(), 16u);
  EXPECT_EQ(schema->names.front(), "total_images");
  EXPECT_EQ(schema->names[8], "modality");
  EXPECT_EQ(schema->names[9], "base_model");
  EXPECT_EQ(schema->names.back(), "trainable_layers");
  EXPECT_EQ(schema->kinds[0], FeatureKind::kContinuous);
  EXPECT_EQ(schema->kinds[9], FeatureKind::kCategorical);
  EXPECT_EQ(schema->kinds[10], FeatureKind::kDiscrete);

  const FeatureVector v = encode(meta, other, schema);
  EXPECT_EQ(v.values[0], 3264.0);
  EXPECT_EQ(v.values[9], 1.0);  // Xception was seen second
  EXPECT_EQ(v.values[10], 1e-4);
  EXPECT_EQ(v.values[11], 32.0);
  EXPECT_EQ(schema->value_label(9, 1.0), "Xception");
  EXPECT_EQ(schema->value_label(10, 1e-4), "0.0001");
}

TEST(Encoding, UnknownCategoryNamesFeatureAndLabel) {
  EncodingTable table;
  const MetaFeatures meta = compute_meta_features({{"a", 10}}, "MRI");
  observe_labels(table, meta, brain_config());
  const auto schema = std::make_shared<const FeatureSchema>(standard_schema(table));
  auto c = brain_config();
  c.base_model = "DenseNet121";
  try {
    encode(meta, c, schema);
    FAIL() << "expected UnknownCategory";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownCategory);
    EXPECT_EQ(e.subject(), "base_model=DenseNet121");
  }
}

}  // namespace
}  // namespace metarec
