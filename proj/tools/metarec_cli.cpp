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

// Command-line front end: ingest, train, explain, recommend, judge,
// replay-eval.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "metarec.hpp"

namespace {

using namespace metarec;

struct GlobalFlags {
  std::string meta_dataset = "metadataset.json";
  std::string model_store = "metarec_model.json";
  std::string endpoint;
  std::size_t k = kDefaultTopK;
  std::uint64_t seed = 42;
};

struct LlmFlags {
  std::string model = "deepseek-coder:6.7b";
  double temperature = 0.1;
  double timeout = 120.0;
  int retries = 2;
  std::string api = "ollama";
};

LlmEndpointConfig endpoint_config(const GlobalFlags& g, const LlmFlags& f) {
  LlmEndpointConfig cfg;
  cfg.base_url = LlmEndpointConfig::resolve_url(g.endpoint);
  cfg.model = f.model;
  cfg.temperature = f.temperature;
  cfg.timeout_seconds = f.timeout;
  cfg.max_retries = f.retries;
  return cfg;
}

WireAdapter adapter_for(const std::string& api) {
  if (api == "openai") return WireAdapter::openai_completions();
  return WireAdapter::ollama();
}

bool table_covers(const EncodingTable& table, const MetaDataset& ds) {
  try {
    for (const auto& r : ds.records) {
      table.code("modality", r.meta.modality);
      table.code("base_model", r.config.base_model);
      table.code("optimizer", r.config.optimizer);
      table.code("trainable_layers", r.config.trainable_layers);
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

/// Loads the stored model, or trains (and stores) one when it is missing or
/// does not know every category in the meta-dataset.
GbdtModel model_for(const MetaDataset& ds, const GlobalFlags& g, const std::string& target,
                    const TrainParams& params) {
  if (std::filesystem::exists(g.model_store)) {
    GbdtModel model = run_stage("load", [&] { return load_model(g.model_store); });
    if (model.target == target && table_covers(model.schema->table, ds)) return model;
    std::cerr << "metarec: stored model is stale for this meta-dataset; retraining\n";
  }
  GbdtModel model = run_stage("train", [&] { return train(ds, target, params); });
  run_stage("store", [&] { save_model(model, g.model_store); });
  return model;
}

HyperparameterConfig config_from_file(const std::string& path, const SearchSpace& space) {
  const nlohmann::json j = run_stage("load", [&] {
    try {
      return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
  });
  // Either a run report or a bare seven-key object.
  if (j.contains("recommendation")) {
    return config_from_json(j["recommendation"]["config"], space);
  }
  return config_from_json(j, space);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot hyperparameter and backbone recommendation from a meta-dataset"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand; inherited by subcommands
  GlobalFlags g;
  app.add_option("--meta-dataset", g.meta_dataset, "Meta-dataset store (JSON array)");
  app.add_option("--model-store", g.model_store, "Trained meta-learner file");
  app.add_option("--endpoint", g.endpoint,
                 "Inference server base URL (default $METAREC_LLM_URL or "
                 "http://127.0.0.1:11434)");
  app.add_option("-k,--top-k", g.k, "Retrieved experiments per prompt")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Learner seed");

  TrainParams params;
  std::string target = "acc";
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--target", target, "Metric to predict");
    cmd->add_option("--rounds", params.num_rounds, "Boosting rounds");
    cmd->add_option("--max-depth", params.max_depth, "Tree depth limit");
    cmd->add_option("--min-leaf", params.min_samples_leaf, "Minimum samples per leaf");
    cmd->add_option("--shrinkage", params.shrinkage, "Learning rate of the booster");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a meta-dataset file and merge it into the store");
  std::string ingest_path;
  ingest->add_option("file", ingest_path, "Meta-dataset JSON file")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the meta-learner");
  add_train_flags(train_cmd);

  auto* explain = app.add_subcommand("explain", "Print the global SHAP summary");
  add_train_flags(explain);

  auto* recommend = app.add_subcommand("recommend", "Recommend a configuration for a new dataset");
  std::string manifest_path;
  LlmFlags llm;
  LlmFlags judge_llm_flags;
  judge_llm_flags.temperature = 0.0;
  bool leave_one_out = false;
  bool with_judge = false;
  bool human = false;
  int judge_runs = kDefaultJudgeRuns;
  std::string report_out;
  recommend->add_option("manifest", manifest_path, "Dataset manifest {class_counts, modality, resolution?}")
      ->required();
  recommend->add_option("--model", llm.model, "Generator model name");
  recommend->add_option("--temperature", llm.temperature, "Sampling temperature");
  recommend->add_option("--timeout", llm.timeout, "Request timeout in seconds");
  recommend->add_option("--retries", llm.retries, "Transport retries");
  recommend->add_option("--api", llm.api, "Server flavour: ollama or openai")
      ->check(CLI::IsMember({"ollama", "openai"}));
  recommend->add_flag("--leave-one-out", leave_one_out,
                      "Exclude records of the manifest's dataset_name from retrieval");
  recommend->add_flag("--judge", with_judge, "Score the output with the judge protocol");
  recommend->add_option("--judge-model", judge_llm_flags.model, "Judge model name");
  recommend->add_option("--judge-runs", judge_runs, "Judge repetitions")->check(CLI::PositiveNumber);
  recommend->add_flag("--human", human, "Human-readable output instead of JSON");
  recommend->add_option("--report-out", report_out, "Also write the JSON report here");
  add_train_flags(recommend);

  auto* judge_cmd = app.add_subcommand("judge", "Score a stored run report");
  std::string report_path;
  judge_cmd->add_option("--report", report_path, "Run report written by 'recommend'")->required();
  judge_cmd->add_option("--judge-model", judge_llm_flags.model, "Judge model name");
  judge_cmd->add_option("--judge-runs", judge_runs, "Judge repetitions")->check(CLI::PositiveNumber);
  judge_cmd->add_option("--timeout", judge_llm_flags.timeout, "Request timeout in seconds");
  judge_cmd->add_option("--api", judge_llm_flags.api, "Server flavour: ollama or openai")
      ->check(CLI::IsMember({"ollama", "openai"}));

  auto* replay = app.add_subcommand("replay-eval", "Look up stored metrics of the nearest held-out configuration");
  std::string replay_config;
  std::string heldout_path;
  std::string replay_dataset;
  replay->add_option("--recommendation", replay_config,
                     "Run report or bare configuration JSON")->required();
  replay->add_option("--heldout", heldout_path, "Held-out meta-dataset file")->required();
  replay->add_option("--dataset", replay_dataset, "Only consider this dataset_name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; malformed command lines are input failures.
    return app.exit(e) == 0 ? 0 : 3;
  }
  params.seed = g.seed;
  const SearchSpace space = SearchSpace::standard();

  try {
    if (*ingest) {
      const IngestReport r = cmd_ingest(ingest_path, g.meta_dataset);
      std::cout << fmt::format("{} record{} read, {} new, store '{}' holds {} record{}\n",
                               r.read, r.read == 1 ? "" : "s", r.added, g.meta_dataset,
                               r.total, r.total == 1 ? "" : "s");
      return 0;
    }

    if (*train_cmd) {
      const MetaDataset ds = run_stage("load", [&] { return load(g.meta_dataset); });
      const TrainReport r = cmd_train(ds, target, params, g.model_store);
      std::cout << fmt::format("trained {} tree(s) on {} records, target '{}'\n", r.trees,
                               ds.size(), target);
      std::cout << fmt::format("train MSE {:.6g} (base-score-only MSE {:.6g})\n", r.train_mse,
                               r.baseline_mse);
      if (r.constant_target) std::cout << "warning: target is constant; model predicts its value\n";
      std::cout << "model written to " << g.model_store << "\n";
      return 0;
    }

    if (*explain) {
      const MetaDataset ds = run_stage("load", [&] { return load(g.meta_dataset); });
      const GbdtModel model = model_for(ds, g, target, params);
      std::cout << cmd_explain(ds, model);
      return 0;
    }

    if (*recommend) {
      const DatasetManifest manifest = run_stage(
          "load", [&] { return parse_manifest(read_text_file(manifest_path), manifest_path); });
      const MetaDataset ds = run_stage("load", [&] { return load(g.meta_dataset); });
      Stopwatch clock;
      const GbdtModel model = model_for(ds, g, target, params);
      const double model_seconds = clock.lap();

      HttpGenerator generator(endpoint_config(g, llm), adapter_for(llm.api));
      std::optional<HttpGenerator> judge_generator;
      if (with_judge) {
        judge_generator.emplace(endpoint_config(g, judge_llm_flags), adapter_for(llm.api));
      }
      RecommendOptions options;
      options.k = g.k;
      options.leave_one_dataset_out = leave_one_out;
      options.run_judge = with_judge;
      options.judge_runs = judge_runs;
      options.target = target;
      options.train_params = params;
      options.space = space;
      RunReport report = cmd_recommend(ds, manifest, generator, options, &model,
                                       judge_generator ? &*judge_generator : nullptr);
      report.timings.train_or_load += model_seconds;
      const std::string json = report_to_json(report).dump(2);
      if (!report_out.empty()) write_text_file(report_out, json + "\n");
      std::cout << (human ? render_report_human(report) : json + "\n");
      return 0;
    }

    if (*judge_cmd) {
      const nlohmann::json report = run_stage("load", [&] {
        try {
          return nlohmann::json::parse(read_text_file(report_path));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kParseError, report_path + ": " + e.what());
        }
      });
      const Recommendation rec = run_stage("load", [&] {
        try {
          Recommendation r = parse_recommendation(
              report.at("recommendation").at("raw_output").get<std::string>(), space);
          return r;
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kSchemaError, report_path + ": " + e.what());
        }
      });
      JudgeAssets assets;
      try {
        assets = {report.at("assets").at("dataset_block").get<std::string>(),
                  report.at("assets").at("summary_text").get<std::string>(),
                  report.at("assets").at("context_block").get<std::string>()};
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kSchemaError, "[stage load] " + report_path + ": " + e.what());
      }
      HttpGenerator judge_generator(endpoint_config(g, judge_llm_flags),
                                    adapter_for(judge_llm_flags.api));
      const JudgeScores scores =
          run_stage("judge", [&] { return judge(judge_generator, rec, assets, judge_runs); });
      std::cout << judge_to_json(scores).dump(2) << "\n";
      return 0;
    }

    if (*replay) {
      const HyperparameterConfig config = config_from_file(replay_config, space);
      const MetaDataset heldout = run_stage("load", [&] { return load(heldout_path); });
      const ReplayResult r = run_stage("replay", [&] {
        return cmd_replay_eval(config, heldout,
                               replay_dataset.empty() ? std::nullopt
                                                      : std::optional<std::string>(replay_dataset));
      });
      const nlohmann::json out = {
          {"record_id", r.record_id},
          {"dataset_name", r.dataset_name},
          {"match", r.flag},
          {"differing_fields", r.differing_fields},
          {"metrics",
           {{"f1", r.metrics.f1},
            {"acc", r.metrics.acc},
            {"recall", r.metrics.recall},
            {"precision", r.metrics.precision},
            {"total_training_time", r.metrics.total_training_time}}}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "metarec: error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "metarec: error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
