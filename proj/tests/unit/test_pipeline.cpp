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
#include "support/fixtures.hpp"
#include "support/generators.hpp"
#include "support/scripted_generator.hpp"

namespace metarec {
namespace {

namespace fs = std::filesystem;
using testing::ScriptedGenerator;

const std::string kDataDir = METAREC_TEST_DATA_DIR;

DatasetManifest brain_manifest() {
  return parse_manifest(read_text_file(kDataDir + "/brain_manifest.json"));
}

std::string brain_reply() {
  return render_output_skeleton(testing::brain_config(),
                                "ResNet50 with a small learning rate did well on similar MRI sets.");
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("metarec_pipeline_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST(Manifest, ParsesBrainManifest) {
  const DatasetManifest m = brain_manifest();
  EXPECT_EQ(m.dataset_name, "brain");
  EXPECT_EQ(m.class_counts.size(), 4u);
  EXPECT_EQ(m.modality, "MRI");
  ASSERT_TRUE(m.resolution.has_value());
  EXPECT_EQ(m.resolution->width, 512);
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest("{"), Error);
  try {
    parse_manifest(R"({"class_counts": {"a": 1.5}, "modality": "CT"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
    EXPECT_EQ(e.subject(), "class_counts.a");
  }
  EXPECT_THROW(parse_manifest(R"({"class_counts": {"a": 3}})"), Error);
}

TEST(Recommend, EndToEndWithPublishedConfig) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 200});
  ScriptedGenerator llm({brain_reply()});
  const RunReport r = cmd_recommend(ds, brain_manifest(), llm, {});
  EXPECT_EQ(r.recommendation.config, testing::brain_config());
  EXPECT_EQ(r.llm_calls, 1);
  EXPECT_EQ(r.retrieved_ids.size(), 8u);
  EXPECT_TRUE(r.model_trained);
  EXPECT_FALSE(r.judge.has_value());
  EXPECT_EQ(r.recommendation.generation.model, "scripted");
  EXPECT_NEAR(r.timings.llm_latency, 0.01, 1e-12);
  for (double t : {r.timings.meta_features, r.timings.train_or_load, r.timings.shap,
                   r.timings.retrieval, r.timings.prompt, r.timings.parse}) {
    EXPECT_GE(t, 0.0);
  }
  const std::string& prompt = llm.prompts.at(0);
  EXPECT_NE(prompt.find("- total_images: 3264"), std::string::npos);
  EXPECT_NE(prompt.find("## Context: 8 Retrieved Experiments"), std::string::npos);
  EXPECT_NE(prompt.find("- image_resolution: 512x512"), std::string::npos);

  // Resolution is shown but does not move the neighbours.
  DatasetManifest bare = brain_manifest();
  bare.resolution.reset();
  ScriptedGenerator again({brain_reply()});
  EXPECT_EQ(cmd_recommend(ds, bare, again, {}).retrieved_ids, r.retrieved_ids);
}

TEST(Recommend, CorrectiveRepromptOnce) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 60});
  ScriptedGenerator llm({"I think ResNet50 is best.", brain_reply()});
  const RunReport r = cmd_recommend(ds, brain_manifest(), llm, {});
  EXPECT_EQ(r.llm_calls, 2);
  EXPECT_NE(llm.prompts.at(1).find("FormatError"), std::string::npos);
  EXPECT_NE(llm.prompts.at(1).find("I think ResNet50 is best."), std::string::npos);
}

TEST(Recommend, OutOfSpaceTwiceFails) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 60});
  auto bad = testing::brain_config();
  bad.batch_size = 128;
  ScriptedGenerator llm({render_output_skeleton(bad, "big batches")});
  try {
    cmd_recommend(ds, brain_manifest(), llm, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfSearchSpace);
    EXPECT_EQ(e.subject(), "batch_size");
    EXPECT_NE(std::string(e.what()).find("[stage parse]"), std::string::npos);
    EXPECT_EQ(exit_code_for(e.code()), 1);
  }
  EXPECT_EQ(llm.calls, 2u);
}

TEST(Recommend, StageTaggedErrors) {
  ScriptedGenerator llm({brain_reply()});
  DatasetManifest m = brain_manifest();
  m.class_counts["empty"] = 0;
  try {
    cmd_recommend(make_synthetic_dataset({.num_records = 20}), m, llm, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidClassCount);
    EXPECT_NE(std::string(e.what()).find("[stage meta_features]"), std::string::npos);
  }
  try {
    cmd_recommend(make_synthetic_dataset({.num_records = 1}), brain_manifest(), llm, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
    EXPECT_NE(std::string(e.what()).find("[stage train]"), std::string::npos);
  }
}

TEST(Recommend, LeaveOneDatasetOut) {
  MetaDataset ds = make_synthetic_dataset({.num_records = 100});
  for (std::size_t i = 0; i < 10; ++i) {
    ds.records[i].dataset_name = "brain";
    ds.records[i].meta = rounded_for_display(testing::brain_meta());
  }
  RecommendOptions opts;
  ScriptedGenerator a({brain_reply()});
  const RunReport with = cmd_recommend(ds, brain_manifest(), a, opts);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_LT(with.retrieved_ids[i], 10);
  opts.leave_one_dataset_out = true;
  ScriptedGenerator b({brain_reply()});
  const RunReport without = cmd_recommend(ds, brain_manifest(), b, opts);
  for (auto id : without.retrieved_ids) EXPECT_GE(id, 10);
}

TEST(Recommend, DeterministicApartFromTimings) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 120});
  auto run = [&] {
    ScriptedGenerator llm({brain_reply()});
    RunReport r = cmd_recommend(ds, brain_manifest(), llm, {});
    r.timings = {};
    r.recommendation.generation.latency_seconds = 0.0;
    return report_to_json(r).dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Recommend, WithJudge) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 60});
  ScriptedGenerator llm({brain_reply()});
  ScriptedGenerator judge_llm({R"({"consistency": 4, "completeness": 3, "conciseness": 4, "fluency": 4, "format": 4})"});
  RecommendOptions opts;
  opts.run_judge = true;
  const RunReport r = cmd_recommend(ds, brain_manifest(), llm, opts, nullptr, &judge_llm);
  ASSERT_TRUE(r.judge.has_value());
  EXPECT_EQ(judge_llm.calls, 3u);
  EXPECT_EQ(r.judge->mean_of("completeness"), 3.0);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["judge"]["means"]["format"], 4.0);
  EXPECT_EQ(j["recommendation"]["config"]["base_model"], "ResNet50");
  EXPECT_EQ(j["llm_calls"], 1);
  EXPECT_EQ(j["flags"]["k"], 8);
  EXPECT_NE(render_report_human(r).find("Judge means:"), std::string::npos);
}

TEST(Recommend, UsesGivenModel) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 60});
  const GbdtModel model = train(ds, "acc");
  ScriptedGenerator llm({brain_reply()});
  const RunReport r = cmd_recommend(ds, brain_manifest(), llm, {}, &model);
  EXPECT_FALSE(r.model_trained);
}

TEST_F(PipelineTest, IngestPublishedEntryIsIdempotent) {
  const std::string store = path("store.json");
  IngestReport r = cmd_ingest(kDataDir + "/brain_entry.json", store);
  EXPECT_EQ(r.read, 1u);
  EXPECT_EQ(r.added, 1u);
  EXPECT_EQ(r.total, 1u);
  const std::string first = read_text_file(store);
  r = cmd_ingest(kDataDir + "/brain_entry.json", store);
  EXPECT_EQ(r.added, 0u);
  EXPECT_EQ(r.total, 1u);
  EXPECT_EQ(read_text_file(store), first);
}

TEST_F(PipelineTest, IngestMergesAndRejectsMalformed) {
  const std::string store = path("store.json");
  save(make_synthetic_dataset({.num_records = 5}), path("a.json"));
  // Same seed, so the first five records coincide.
  save(make_synthetic_dataset({.num_records = 8}), path("b.json"));
  cmd_ingest(path("a.json"), store);
  const IngestReport r = cmd_ingest(path("b.json"), store);
  EXPECT_EQ(r.read, 8u);
  EXPECT_EQ(r.added, 3u);
  EXPECT_EQ(r.total, 8u);
  const MetaDataset merged = load(store);
  for (std::size_t i = 0; i < merged.size(); ++i) EXPECT_EQ(merged.records[i].record_id, static_cast<std::int64_t>(i));

  write_text_file(path("bad.json"), "[{\"dataset_name\": \"x\"}]");
  try {
    cmd_ingest(path("bad.json"), store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos);
    EXPECT_EQ(exit_code_for(e.code()), 3);
  }
  EXPECT_EQ(load(store).size(), r.total);
}

TEST_F(PipelineTest, TrainOnTwoRecordsWritesModel) {
  MetaDataset ds = parse_dataset(read_text_file(kDataDir + "/brain_entry.json"));
  ExperimentRecord second = ds.records[0];
  second.config.batch_size = 64;
  second.metrics.acc = 0.7;
  ds = append(ds, second);
  const TrainReport r = cmd_train(ds, "acc", {}, path("model.json"));
  EXPECT_TRUE(fs::exists(path("model.json")));
  EXPECT_LE(r.train_mse, r.baseline_mse);
  EXPECT_EQ(load_model(path("model.json")).target, "acc");
  try {
    cmd_train(ds, "auc", {}, path("model2.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(exit_code_for(e.code()), 0);
  }
}

TEST(Explain, TwiceIdentical) {
  const MetaDataset ds = make_synthetic_dataset({.num_records = 100});
  const GbdtModel model = train(ds, "acc");
  EXPECT_EQ(cmd_explain(ds, model), cmd_explain(ds, model));
}

TEST(ReplayEval, ExactNearestAndEmpty) {
  MetaDataset heldout = parse_dataset(read_text_file(kDataDir + "/brain_entry.json"));
  ExperimentRecord other = heldout.records[0];
  other.config.batch_size = 64;
  other.metrics.acc = 0.5;
  heldout = append(heldout, other);

  ReplayResult r = cmd_replay_eval(testing::brain_config(), heldout);
  EXPECT_EQ(r.flag, "exact");
  EXPECT_EQ(r.metrics.acc, 0.746);

  auto query = testing::brain_config();
  query.batch_size = 16;
  r = cmd_replay_eval(query, heldout);
  EXPECT_EQ(r.flag, "nearest(1)");
  EXPECT_EQ(r.record_id, 0);

  query.batch_size = 64;
  query.optimizer = "adam";
  r = cmd_replay_eval(query, heldout);
  EXPECT_EQ(r.flag, "nearest(1)");
  EXPECT_EQ(r.record_id, 1);
  EXPECT_EQ(r.metrics.acc, 0.5);

  EXPECT_THROW(cmd_replay_eval(query, MetaDataset{}), Error);
  try {
    cmd_replay_eval(query, heldout, std::string("chest"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(ExitCodes, Classes) {
  EXPECT_EQ(exit_code_for(ErrorCode::kFormatError), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::kKeyError), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::kOutOfSearchSpace), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::kMissingExplanation), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::kTimeoutError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kUnavailable), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kServerError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kSchemaError), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kIoError), 3);
}

}  // namespace
}  // namespace metarec
