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
#include "support/process.hpp"
#include "support/stub_server.hpp"

namespace metarec {
namespace {

namespace fs = std::filesystem;
using testing::quoted;
using testing::run_command;

const std::string kCli = METAREC_CLI_PATH;
const std::string kDataDir = METAREC_TEST_DATA_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("metarec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    store_ = (dir_ / "store.json").string();
    model_ = (dir_ / "model.json").string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  testing::ProcessResult cli(const std::string& args) const {
    return run_command(kCli + " --meta-dataset " + quoted(store_) + " --model-store " +
                       quoted(model_) + " " + args);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void seed_store(std::size_t records) const {
    save(make_synthetic_dataset({.num_records = records}), store_);
  }

  fs::path dir_;
  std::string store_;
  std::string model_;
};

std::string brain_reply() {
  return render_output_skeleton(testing::brain_config(), "Similar MRI records favour ResNet50.");
}

TEST_F(CliTest, IngestPublishedEntry) {
  auto r = cli("ingest " + quoted(kDataDir + "/brain_entry.json"));
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("1 record read"), std::string::npos) << r.out;
  r = cli("ingest " + quoted(kDataDir + "/brain_entry.json"));
  EXPECT_NE(r.out.find("0 new"), std::string::npos) << r.out;
  EXPECT_EQ(load(store_).size(), 1u);
}

TEST_F(CliTest, IngestMalformedFails) {
  write_text_file(path("bad.json"), "[{\"dataset_name\": \"x\", \"meta\": {}}]");
  const auto r = cli("ingest " + quoted(path("bad.json")));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.out.find("SchemaError"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("record 0"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainAndExplain) {
  seed_store(80);
  auto r = cli("train");
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("train MSE"), std::string::npos);
  EXPECT_TRUE(fs::exists(model_));
  const auto a = cli("explain");
  const auto b = cli("explain");
  EXPECT_EQ(a.exit_code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("# SHAP Analysis Summary", 0), 0u) << a.out;
}

TEST_F(CliTest, TrainUnknownTargetFails) {
  seed_store(20);
  const auto r = cli("train --target auc");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.out.find("auc"), std::string::npos) << r.out;
}

TEST_F(CliTest, MissingStoreIsInputFailure) {
  const auto r = cli("train");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.out.find("[stage load]"), std::string::npos) << r.out;
}

TEST_F(CliTest, RecommendAgainstStub) {
  seed_store(150);
  testing::StubServer server(testing::scripted({brain_reply()}));
  const auto r = cli("--endpoint " + server.url() + " recommend " +
                     quoted(kDataDir + "/brain_manifest.json") + " --report-out " +
                     quoted(path("report.json")));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto j = nlohmann::json::parse(read_text_file(path("report.json")));
  EXPECT_EQ(j["recommendation"]["config"]["base_model"], "ResNet50");
  EXPECT_EQ(j["recommendation"]["config"]["learning_rate"], 0.0001);
  EXPECT_EQ(j["retrieved_record_ids"].size(), 8u);
  EXPECT_TRUE(fs::exists(model_)) << "model trained on demand and stored";

  // The stored run can be replayed against held-out records and judged.
  save(make_synthetic_dataset({.num_records = 40, .seed = 99}), path("heldout.json"));
  const auto replay = cli("replay-eval --recommendation " + quoted(path("report.json")) +
                          " --heldout " + quoted(path("heldout.json")));
  ASSERT_EQ(replay.exit_code, 0) << replay.out;
  const auto rj = nlohmann::json::parse(replay.out);
  EXPECT_TRUE(rj["match"] == "exact" || rj["match"].get<std::string>().rfind("nearest(", 0) == 0);

  testing::StubServer judge_server(testing::scripted(
      {R"({"consistency": 4, "completeness": 4, "conciseness": 3, "fluency": 4, "format": 4})"}));
  const auto judged = cli("--endpoint " + judge_server.url() + " judge --report " +
                          quoted(path("report.json")));
  ASSERT_EQ(judged.exit_code, 0) << judged.out;
  EXPECT_EQ(nlohmann::json::parse(judged.out)["means"]["conciseness"], 3.0);
}

TEST_F(CliTest, RecommendHumanOutput) {
  seed_store(60);
  testing::StubServer server(testing::scripted({brain_reply()}));
  const auto r = cli("--endpoint " + server.url() + " -k 3 recommend --human " +
                     quoted(kDataDir + "/brain_manifest.json"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("Recommended configuration"), std::string::npos);
  EXPECT_NE(r.out.find("trainable_layers last_10"), std::string::npos) << r.out;
}

TEST_F(CliTest, RecommendOutOfSpaceExitsOne) {
  seed_store(60);
  auto bad = testing::brain_config();
  bad.optimizer = "adagrad";
  testing::StubServer server(testing::scripted({render_output_skeleton(bad, "x")}));
  const auto r = cli("--endpoint " + server.url() + " recommend " +
                     quoted(kDataDir + "/brain_manifest.json"));
  EXPECT_EQ(r.exit_code, 1) << r.out;
  EXPECT_NE(r.out.find("OutOfSearchSpace"), std::string::npos) << r.out;
  EXPECT_EQ(server.hits(), 2);
}

TEST_F(CliTest, RecommendUnreachableExitsTwo) {
  seed_store(60);
  std::string url;
  {
    testing::StubServer gone([](const httplib::Request&, httplib::Response&) {});
    url = gone.url();
  }
  const auto r = cli("--endpoint " + url + " recommend --retries 0 " +
                     quoted(kDataDir + "/brain_manifest.json"));
  EXPECT_EQ(r.exit_code, 2) << r.out;
  EXPECT_NE(r.out.find("[stage llm]"), std::string::npos) << r.out;
}

TEST_F(CliTest, GlobalFlagsAfterSubcommand) {
  seed_store(40);
  const auto r = run_command(kCli + " train --meta-dataset " + testing::quoted(store_) + " --model-store " +
                             testing::quoted(model_));
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_TRUE(fs::exists(model_));
}

TEST_F(CliTest, UsageErrorsAreInputFailures) {
  EXPECT_EQ(cli("train --no-such-flag").exit_code, 3);
  EXPECT_EQ(cli("frobnicate").exit_code, 3);
  EXPECT_EQ(cli("--rounds notanumber train").exit_code, 3);
  EXPECT_EQ(run_command(kCli + " --help").exit_code, 0);
  EXPECT_EQ(run_command(kCli + " recommend --help").exit_code, 0);
}

TEST_F(CliTest, StaleModelIsRetrained) {
  MetaDataset ds = make_synthetic_dataset({.num_records = 40});
  for (auto& r : ds.records) r.config.base_model = "Xception";
  save(ds, store_);
  ASSERT_EQ(cli("train").exit_code, 0);
  // The stored model has never seen this backbone.
  ds.records[0].config.base_model = "DenseNet121";
  save(ds, store_);
  const auto r = cli("explain");
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("retraining"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace metarec
