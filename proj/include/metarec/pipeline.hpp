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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/dataset.hpp"
#include "metarec/error.hpp"
#include "metarec/gbdt.hpp"
#include "metarec/judge.hpp"
#include "metarec/llm_client.hpp"
#include "metarec/meta_features.hpp"
#include "metarec/prompt.hpp"
#include "metarec/recommendation.hpp"
#include "metarec/retrieval.hpp"
#include "metarec/shap_summary.hpp"
#include "metarec/tree_shap.hpp"

namespace metarec {

// Command-level orchestration shared by the CLI and the integration tests.

/// A new dataset to recommend for: {class_counts, modality, resolution?}.
struct DatasetManifest {
  std::string dataset_name;
  std::map<std::string, std::int64_t> class_counts;
  std::string modality;
  std::optional<ImageResolution> resolution;
};

inline DatasetManifest parse_manifest(const std::string& text,
                                      const std::string& source = "<manifest>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, source + ": " + e.what());
  }
  auto fail = [&](const std::string& field, const std::string& msg) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("{}: field '{}' {}", source, field, msg), field);
  };
  if (!j.is_object()) fail("<root>", "must be an object");
  DatasetManifest m;
  if (auto it = j.find("dataset_name"); it != j.end()) {
    if (!it->is_string()) fail("dataset_name", "must be a string");
    m.dataset_name = it->get<std::string>();
  }
  const auto counts = j.find("class_counts");
  if (counts == j.end() || !counts->is_object()) fail("class_counts", "must be an object");
  for (auto it = counts->begin(); it != counts->end(); ++it) {
    if (!it.value().is_number_integer()) fail("class_counts." + it.key(), "must be an integer");
    m.class_counts[it.key()] = it.value().get<std::int64_t>();
  }
  const auto modality = j.find("modality");
  if (modality == j.end() || !modality->is_string()) fail("modality", "must be a string");
  m.modality = modality->get<std::string>();
  if (auto it = j.find("resolution"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer()) {
      fail("resolution", "must be [width, height]");
    }
    m.resolution = ImageResolution{(*it)[0].get<int>(), (*it)[1].get<int>()};
  }
  return m;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path + "'");
}

/// Runs `fn`, re-tagging any library error with the stage name.
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("[stage {}] {}", stage, e.what()), e.subject());
  }
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct StageTimings {
  double meta_features = 0.0;
  double train_or_load = 0.0;
  double shap = 0.0;
  double retrieval = 0.0;
  double prompt = 0.0;
  double llm_latency = 0.0;
  double parse = 0.0;

  double non_llm_total() const {
    return meta_features + train_or_load + shap + retrieval + prompt + parse;
  }
};

struct RecommendOptions {
  std::size_t k = kDefaultTopK;
  bool leave_one_dataset_out = false;
  bool run_judge = false;
  int judge_runs = kDefaultJudgeRuns;
  std::string target = "acc";
  TrainParams train_params;
  SearchSpace space = SearchSpace::standard();
};

struct RunReport {
  Recommendation recommendation;
  std::optional<JudgeScores> judge;
  StageTimings timings;
  std::vector<std::int64_t> retrieved_ids;
  int llm_calls = 0;
  RecommendOptions options;
  JudgeAssets assets;
  bool model_trained = false;
};

/// Everything up to (not including) the LLM call.
struct PreparedPrompt {
  MetaFeatures meta;
  PromptBundle prompt;
  std::vector<std::int64_t> retrieved_ids;
  StageTimings timings;
  bool model_trained = false;
};

inline PreparedPrompt prepare_prompt(const MetaDataset& ds, const DatasetManifest& manifest,
                                     const RecommendOptions& options,
                                     const GbdtModel* model = nullptr) {
  PreparedPrompt out;
  Stopwatch clock;
  out.meta = run_stage("meta_features", [&] {
    return compute_meta_features(manifest.class_counts, manifest.modality, manifest.resolution);
  });
  out.timings.meta_features = clock.lap();

  std::optional<GbdtModel> trained;
  if (model == nullptr) {
    trained = run_stage("train", [&] { return train(ds, options.target, options.train_params); });
    model = &*trained;
    out.model_trained = true;
  }
  out.timings.train_or_load = clock.lap();

  std::vector<FeatureVector> vectors;
  std::vector<ShapAttribution> attributions;
  const std::string summary_text = run_stage("shap", [&] {
    vectors = encode_dataset(ds, model->schema);
    attributions.reserve(vectors.size());
    for (const auto& v : vectors) attributions.push_back(tree_shap(*model, v));
    return render_summary(aggregate(attributions, vectors, model->target));
  });
  out.timings.shap = clock.lap();

  const RetrievedContext context = run_stage("retrieval", [&] {
    const RetrievalIndex index = build_index(ds);
    QueryOptions q;
    if (options.leave_one_dataset_out && !manifest.dataset_name.empty()) {
      q.exclude_dataset = manifest.dataset_name;
    }
    const auto neighbors = query(index, out.meta, options.k, q);
    return assemble_context(neighbors, ds, [&](std::size_t row) {
      return top_local_features(attributions[row], vectors[row], 3);
    });
  });
  for (const auto& e : context.entries) out.retrieved_ids.push_back(e.record.record_id);
  out.timings.retrieval = clock.lap();

  out.prompt = run_stage("prompt",
                         [&] { return build_prompt(out.meta, summary_text, context, options.space); });
  out.timings.prompt = clock.lap();
  return out;
}

inline bool is_reply_rejection(ErrorCode code) {
  return code == ErrorCode::kFormatError || code == ErrorCode::kKeyError ||
         code == ErrorCode::kOutOfSearchSpace || code == ErrorCode::kMissingExplanation;
}

/// The full recommendation pipeline. At most two generation calls: the
/// second one carries the parser's complaint about the first reply.
inline RunReport cmd_recommend(const MetaDataset& ds, const DatasetManifest& manifest,
                               TextGenerator& llm, const RecommendOptions& options,
                               const GbdtModel* model = nullptr,
                               TextGenerator* judge_llm = nullptr) {
  PreparedPrompt prepared = prepare_prompt(ds, manifest, options, model);
  RunReport report;
  report.options = options;
  report.timings = prepared.timings;
  report.retrieved_ids = prepared.retrieved_ids;
  report.model_trained = prepared.model_trained;
  report.assets = {prepared.prompt.dataset_block, prepared.prompt.summary_block.substr(
                                                      std::string_view("## SHAP Summary\n").size()),
                   prepared.prompt.context_block};

  std::string prompt = prepared.prompt.rendered;
  constexpr int kMaxCalls = 2;
  for (int call = 1; call <= kMaxCalls; ++call) {
    const Completion completion = run_stage("llm", [&] { return llm.generate(prompt); });
    report.llm_calls = call;
    report.timings.llm_latency += completion.latency_seconds;
    Stopwatch clock;
    try {
      report.recommendation = parse_recommendation(completion.text, options.space);
      report.timings.parse += clock.lap();
      report.recommendation.generation = {llm.model_name(), llm.temperature(),
                                          report.timings.llm_latency};
      break;
    } catch (const Error& e) {
      report.timings.parse += clock.lap();
      if (!is_reply_rejection(e.code()) || call == kMaxCalls) {
        throw Error(e.code(), fmt::format("[stage parse] {}", e.what()), e.subject());
      }
      prompt = build_correction_prompt(prepared.prompt, completion.text, e.what());
    }
  }

  if (options.run_judge) {
    TextGenerator& j = judge_llm != nullptr ? *judge_llm : llm;
    report.judge = run_stage("judge", [&] {
      return judge(j, report.recommendation, report.assets, options.judge_runs);
    });
  }
  return report;
}

// --- report serialization ----------------------------------------------------

inline nlohmann::json config_to_json(const HyperparameterConfig& c) {
  return nlohmann::json::parse(render_config_object(c));
}

inline HyperparameterConfig config_from_json(const nlohmann::json& j, const SearchSpace& space) {
  // Re-use the reply parser so the same coercions and checks apply.
  return parse_recommendation(j.dump() + "\nExplanation: stored", space).config;
}

inline nlohmann::json judge_to_json(const JudgeScores& s) {
  nlohmann::json means = nlohmann::json::object();
  const auto& dims = judge_dimensions();
  for (std::size_t i = 0; i < dims.size(); ++i) means[dims[i]] = s.mean[i];
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : s.failures) {
    failures.push_back({{"run", f.run}, {"error", std::string(to_string(f.code))},
                        {"message", f.message}});
  }
  return {{"runs_requested", s.runs_requested},
          {"runs_accepted", s.run_count()},
          {"means", means},
          {"raw", s.raw},
          {"failures", failures}};
}

inline nlohmann::json report_to_json(const RunReport& r) {
  const Recommendation& rec = r.recommendation;
  nlohmann::json j;
  j["recommendation"] = {{"config", config_to_json(rec.config)},
                         {"explanation", rec.explanation},
                         {"raw_output", rec.raw_output},
                         {"model", rec.generation.model},
                         {"temperature", rec.generation.temperature},
                         {"latency_seconds", rec.generation.latency_seconds}};
  j["judge"] = r.judge ? judge_to_json(*r.judge) : nlohmann::json(nullptr);
  const StageTimings& t = r.timings;
  j["timings"] = {{"meta_features", t.meta_features}, {"train_or_load", t.train_or_load},
                  {"shap", t.shap},                   {"retrieval", t.retrieval},
                  {"prompt", t.prompt},               {"llm_latency", t.llm_latency},
                  {"parse", t.parse},                 {"non_llm_total", t.non_llm_total()}};
  j["retrieved_record_ids"] = r.retrieved_ids;
  j["llm_calls"] = r.llm_calls;
  j["flags"] = {{"k", r.options.k},
                {"leave_one_dataset_out", r.options.leave_one_dataset_out},
                {"judge", r.options.run_judge},
                {"target", r.options.target},
                {"seed", r.options.train_params.seed},
                {"model_trained", r.model_trained}};
  j["assets"] = {{"dataset_block", r.assets.dataset_block},
                 {"summary_text", r.assets.summary_text},
                 {"context_block", r.assets.context_block}};
  return j;
}

inline std::string render_report_human(const RunReport& r) {
  const auto& c = r.recommendation.config;
  std::string out = "Recommended configuration\n";
  out += fmt::format("  base_model       {}\n  learning_rate    {}\n  batch_size       {}\n"
                     "  dropout_rate     {}\n  dense_units      {}\n  optimizer        {}\n"
                     "  trainable_layers {}\n",
                     c.base_model, format_decimal(c.learning_rate), c.batch_size,
                     format_decimal(c.dropout_rate), c.dense_units, c.optimizer,
                     c.trainable_layers);
  out += "\nExplanation\n  " + r.recommendation.explanation + "\n";
  out += fmt::format("\nRetrieved records: {}\n", fmt::join(r.retrieved_ids, ", "));
  out += fmt::format("LLM calls: {}, LLM latency {:.3f} s, other stages {:.3f} s\n",
                     r.llm_calls, r.timings.llm_latency, r.timings.non_llm_total());
  if (r.judge) {
    out += "Judge means:";
    const auto& dims = judge_dimensions();
    for (std::size_t i = 0; i < dims.size(); ++i) {
      out += fmt::format(" {}={:.2f}", dims[i], r.judge->mean[i]);
    }
    out += fmt::format(" ({} of {} runs)\n", r.judge->run_count(), r.judge->runs_requested);
  }
  return out;
}

// --- other commands -------------------------------------------------------------

struct IngestReport {
  std::size_t read = 0;
  std::size_t added = 0;
  std::size_t total = 0;
};

inline bool same_content(const ExperimentRecord& a, const ExperimentRecord& b) {
  ExperimentRecord x = a;
  ExperimentRecord y = b;
  x.record_id = y.record_id = 0;
  x.meta = rounded_for_display(x.meta);
  y.meta = rounded_for_display(y.meta);
  return x == y;
}

/// Validates `input` and merges its records into the store at `store_path`
/// (created if absent). Records already present are skipped.
inline IngestReport cmd_ingest(const std::string& input, const std::string& store_path,
                               const LoadOptions& options = {}) {
  const MetaDataset incoming = run_stage("ingest", [&] { return load(input, options); });
  MetaDataset store;
  if (std::filesystem::exists(store_path)) {
    store = run_stage("store", [&] { return load(store_path, options); });
  }
  IngestReport report;
  report.read = incoming.size();
  for (const auto& r : incoming.records) {
    bool present = false;
    for (const auto& s : store.records) present = present || same_content(r, s);
    if (!present) {
      // `load` has already checked the record.
      ExperimentRecord copy = r;
      copy.record_id = store.empty() ? 0 : store.records.back().record_id + 1;
      store.records.push_back(std::move(copy));
      ++report.added;
    }
  }
  store.provenance = {input, incoming.provenance.ingested_at};
  run_stage("store", [&] { save(store, store_path); });
  report.total = store.size();
  return report;
}

struct TrainReport {
  double train_mse = 0.0;
  double baseline_mse = 0.0;
  std::size_t trees = 0;
  bool constant_target = false;
};

inline TrainReport cmd_train(const MetaDataset& ds, const std::string& target,
                             const TrainParams& params, const std::string& model_path) {
  const TrainOutcome outcome =
      run_stage("train", [&] { return train_with_trace(ds, target, params); });
  run_stage("store", [&] { save_model(outcome.model, model_path); });
  return {outcome.round_mse.back(), outcome.round_mse.front(), outcome.model.trees.size(),
          outcome.model.constant_target};
}

inline std::string cmd_explain(const MetaDataset& ds, const GbdtModel& model) {
  return run_stage("shap", [&] {
    const auto attributions = explain_dataset(model, ds);
    return render_summary(aggregate(attributions, ds, model));
  });
}

struct ReplayResult {
  std::int64_t record_id = 0;
  std::string dataset_name;
  PerformanceMetrics metrics;
  int differing_fields = 0;
  std::string flag;  // "exact" or "nearest(d)"
};

/// Looks up the held-out record whose configuration is closest to `config`
/// (fewest differing fields, then lowest record id).
inline ReplayResult cmd_replay_eval(const HyperparameterConfig& config,
                                    const MetaDataset& heldout,
                                    const std::optional<std::string>& dataset_name = {}) {
  const ExperimentRecord* best = nullptr;
  int best_d = 0;
  for (const auto& r : heldout.records) {
    if (dataset_name && r.dataset_name != *dataset_name) continue;
    const int d = config_distance(config, r.config);
    if (best == nullptr || d < best_d || (d == best_d && r.record_id < best->record_id)) {
      best = &r;
      best_d = d;
    }
  }
  if (best == nullptr) {
    throw Error(ErrorCode::kInsufficientData,
                dataset_name ? "no held-out records for dataset '" + *dataset_name + "'"
                             : std::string("no held-out records"));
  }
  return {best->record_id, best->dataset_name, best->metrics, best_d,
          best_d == 0 ? std::string("exact") : fmt::format("nearest({})", best_d)};
}

}  // namespace metarec
