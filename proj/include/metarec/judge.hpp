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

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/error.hpp"
#include "metarec/llm_client.hpp"
#include "metarec/recommendation.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

inline constexpr std::size_t kJudgeDimensions = 5;
inline constexpr int kDefaultJudgeRuns = 3;
inline constexpr int kMaxJudgeScore = 4;

/// "consistency" covers both accuracy and consistency with the assets.
inline const std::array<std::string, kJudgeDimensions>& judge_dimensions() {
  static const std::array<std::string, kJudgeDimensions> dims = {
      "consistency", "completeness", "conciseness", "fluency", "format"};
  return dims;
}

using RawJudgeScores = std::array<int, kJudgeDimensions>;

struct JudgeFailure {
  int run = 0;
  ErrorCode code = ErrorCode::kJudgeFormatError;
  std::string message;
  std::string raw;
};

struct JudgeScores {
  std::array<double, kJudgeDimensions> mean{};
  std::vector<RawJudgeScores> raw;  // one entry per accepted run
  std::vector<JudgeFailure> failures;
  int runs_requested = kDefaultJudgeRuns;

  std::size_t run_count() const { return raw.size(); }

  double mean_of(std::string_view dimension) const {
    const auto& dims = judge_dimensions();
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (dims[i] == dimension) return mean[i];
    }
    throw Error(ErrorCode::kInvalidArgument,
                "unknown judge dimension '" + std::string(dimension) + "'");
  }
};

/// Exactly the blocks that went into the recommendation prompt.
struct JudgeAssets {
  std::string dataset_block;
  std::string summary_text;
  std::string context_block;
};

inline std::string build_judge_prompt(const Recommendation& rec, const JudgeAssets& assets) {
  std::string out;
  out += "## Role\nReview the candidate output below, written by another model from the "
         "listed assets, and score it.\n\n";
  out += "## Assets given to the candidate\n";
  out += assets.dataset_block + "\n\n";
  out += "## SHAP Summary\n" + assets.summary_text + "\n\n";
  out += assets.context_block + "\n\n";
  out += "## Candidate output\n" + rec.raw_output + "\n\n";
  out += R"(## Rubric
Give each dimension an integer score from 0 (worst) to 4 (best):
- consistency: claims in the explanation agree with the dataset description, the SHAP summary and the retrieved records.
- completeness: the explanation draws on all three inputs and covers every chosen value.
- conciseness: no padding or repetition.
- fluency: readable, grammatical prose.
- format: a single JSON object with exactly the seven required keys, then the explanation.

## Output Format (strict)
Reply with one JSON object and nothing else:
{
  "consistency": {"score": <0-4>, "justification": "<one line>"},
  "completeness": {"score": <0-4>, "justification": "<one line>"},
  "conciseness": {"score": <0-4>, "justification": "<one line>"},
  "fluency": {"score": <0-4>, "justification": "<one line>"},
  "format": {"score": <0-4>, "justification": "<one line>"}
}
)";
  return out;
}

/// Reads the five integer scores. Accepts {"dim": n} and
/// {"dim": {"score": n, ...}}. Throws kJudgeFormatError on anything else.
inline RawJudgeScores parse_judge_reply(std::string_view reply) {
  const auto& dims = judge_dimensions();
  const std::vector<std::string> wanted(dims.begin(), dims.end());
  const auto found = detail::find_json_object(reply, wanted);
  if (!found) throw Error(ErrorCode::kJudgeFormatError, "judge reply has no JSON object");
  RawJudgeScores scores{};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto it = found->value.find(dims[i]);
    if (it == found->value.end()) {
      throw Error(ErrorCode::kJudgeFormatError, "judge reply lacks '" + dims[i] + "'",
                  dims[i]);
    }
    const nlohmann::json& v = it->is_object() && it->contains("score") ? (*it)["score"] : *it;
    bool integral = v.is_number_integer();
    if (!integral && v.is_number_float()) {
      const double d = v.get<double>();
      integral = std::isfinite(d) && d == std::floor(d);
    }
    if (!integral) {
      throw Error(ErrorCode::kJudgeFormatError,
                  fmt::format("score for '{}' is not an integer: {}", dims[i], v.dump()),
                  dims[i]);
    }
    const auto score = static_cast<long long>(v.get<double>());
    if (score < 0 || score > kMaxJudgeScore) {
      throw Error(ErrorCode::kJudgeFormatError,
                  fmt::format("score for '{}' is {} (allowed 0..{})", dims[i], score,
                              kMaxJudgeScore),
                  dims[i]);
    }
    scores[i] = static_cast<int>(score);
  }
  return scores;
}

/// Arithmetic mean per dimension over accepted runs.
inline std::array<double, kJudgeDimensions> mean_scores(const std::vector<RawJudgeScores>& runs) {
  std::array<double, kJudgeDimensions> mean{};
  if (runs.empty()) return mean;
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < kJudgeDimensions; ++i) mean[i] += r[i];
  }
  for (auto& m : mean) m /= static_cast<double>(runs.size());
  return mean;
}

/// Scores `rec` `runs` times. A run whose reply cannot be parsed is asked
/// once more; if that also fails the run is dropped and recorded.
inline JudgeScores judge(TextGenerator& judge_llm, const Recommendation& rec,
                         const JudgeAssets& assets, int runs = kDefaultJudgeRuns) {
  if (runs < 1) throw Error(ErrorCode::kInvalidArgument, "judge runs must be >= 1", "runs");
  const std::string prompt = build_judge_prompt(rec, assets);
  JudgeScores out;
  out.runs_requested = runs;
  for (int run = 0; run < runs; ++run) {
    constexpr int kAttemptsPerRun = 2;
    for (int attempt = 0; attempt < kAttemptsPerRun; ++attempt) {
      std::string reply;
      try {
        reply = judge_llm.generate(prompt).text;
        out.raw.push_back(parse_judge_reply(reply));
        break;
      } catch (const Error& e) {
        if (attempt + 1 == kAttemptsPerRun) {
          out.failures.push_back({run, e.code(), e.what(), reply});
        }
      }
    }
  }
  if (out.raw.empty()) {
    throw Error(ErrorCode::kJudgeUnavailable,
                fmt::format("all {} judge runs failed; last: {}", runs,
                            out.failures.empty() ? "" : out.failures.back().message));
  }
  out.mean = mean_scores(out.raw);
  return out;
}

}  // namespace metarec
