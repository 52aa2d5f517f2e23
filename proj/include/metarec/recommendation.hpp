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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "metarec/error.hpp"
#include "metarec/search_space.hpp"
#include "metarec/text_util.hpp"

namespace metarec {

/// Keys of the recommendation object, in contract order.
inline const std::vector<std::string>& recommendation_keys() {
  static const std::vector<std::string> keys = {
      "base_model", "learning_rate", "batch_size",      "dropout_rate",
      "dense_units", "optimizer",    "trainable_layers"};
  return keys;
}

struct GenerationInfo {
  std::string model;
  double temperature = 0.0;
  double latency_seconds = 0.0;
};

/// A validated configuration with its natural-language justification.
struct Recommendation {
  HyperparameterConfig config;
  std::string explanation;
  std::string raw_output;
  GenerationInfo generation;
};

/// The JSON object of the output contract for `config` (keys in order).
inline std::string render_config_object(const HyperparameterConfig& c,
                                        const char* indent = "  ") {
  const std::string i = indent;
  return fmt::format(
      "{{\n{i}\"base_model\": {},\n{i}\"learning_rate\": {},\n{i}\"batch_size\": {},\n"
      "{i}\"dropout_rate\": {},\n{i}\"dense_units\": {},\n{i}\"optimizer\": {},\n"
      "{i}\"trainable_layers\": {}\n}}",
      nlohmann::json(c.base_model).dump(), format_decimal(c.learning_rate), c.batch_size,
      format_decimal(c.dropout_rate), c.dense_units, nlohmann::json(c.optimizer).dump(),
      nlohmann::json(c.trainable_layers).dump(), fmt::arg("i", i));
}

/// A reply laid out exactly as the output contract asks.
inline std::string render_output_skeleton(const HyperparameterConfig& config,
                                          std::string_view explanation) {
  return render_config_object(config) + "\n\nExplanation:\n" + std::string(explanation) +
         "\n";
}

namespace detail {

/// First balanced JSON object in `text`, preferring one that carries any of
/// `wanted` keys. Returns the object and its [begin, end) byte span.
struct LocatedObject {
  nlohmann::json value;
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::optional<LocatedObject> find_json_object(
    std::string_view text, const std::vector<std::string>& wanted) {
  std::optional<LocatedObject> fallback;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    const std::size_t end = match_brace(text, pos);
    if (end == std::string_view::npos) continue;
    nlohmann::json j = nlohmann::json::parse(text.substr(pos, end - pos), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    bool has_wanted = wanted.empty();
    for (const auto& k : wanted) has_wanted = has_wanted || j.contains(k);
    LocatedObject found{std::move(j), pos, end};
    if (has_wanted) return found;
    if (!fallback) fallback = std::move(found);
  }
  return fallback;
}

[[noreturn]] inline void out_of_space(const std::string& param, const std::string& value,
                                      const std::string& admissible) {
  throw Error(ErrorCode::kOutOfSearchSpace,
              fmt::format("{} = {} is not in the search space {}", param, value, admissible),
              param);
}

inline std::optional<double> as_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s(trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

inline std::string label_of(const std::vector<std::string>& admissible,
                            const nlohmann::json& v, const char* param) {
  const std::string shown = v.is_string() ? v.get<std::string>() : v.dump();
  if (v.is_string()) {
    const std::string want = to_lower(trim(v.get<std::string>()));
    for (const auto& a : admissible) {
      if (to_lower(a) == want) return a;
    }
  }
  out_of_space(param, shown, render_list(admissible));
}

inline double real_of(const std::vector<double>& admissible, const nlohmann::json& v,
                      const char* param) {
  if (auto d = as_number(v)) {
    for (double a : admissible) {
      if (numeric_matches(*d, a)) return a;
    }
  }
  out_of_space(param, v.is_string() ? v.get<std::string>() : v.dump(),
               render_list(admissible));
}

inline std::int64_t integer_of(const std::vector<std::int64_t>& admissible,
                               const nlohmann::json& v, const char* param) {
  if (auto d = as_number(v); d && std::isfinite(*d) && *d == std::floor(*d)) {
    for (auto a : admissible) {
      if (static_cast<double>(a) == *d) return a;
    }
  }
  out_of_space(param, v.is_string() ? v.get<std::string>() : v.dump(),
               render_list(admissible));
}

// Accepts the short labels ("last_10") as well as descriptive spellings
// ("Partial fine-tuning (10 layers)", "Feature extraction only", 30).
inline std::string trainable_layers_of(const std::vector<std::string>& admissible,
                                       const nlohmann::json& v) {
  std::optional<std::string> canonical;
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d == 0.0) canonical = "feature_extraction";
    if (d == 10.0) canonical = "last_10";
    if (d == 30.0) canonical = "last_30";
  } else if (v.is_string()) {
    std::string s = to_lower(trim(v.get<std::string>()));
    for (char& c : s) {
      if (c == '-' || c == ' ') c = '_';
    }
    for (const auto& a : admissible) {
      if (to_lower(a) == s) return a;
    }
    if (s.find("feature") != std::string::npos || s == "none" || s == "frozen" ||
        s == "0") {
      canonical = "feature_extraction";
    } else if (s.find("full") != std::string::npos || s == "all") {
      canonical = "full";
    } else if (s.find("30") != std::string::npos) {
      canonical = "last_30";
    } else if (s.find("10") != std::string::npos) {
      canonical = "last_10";
    }
  }
  if (canonical) {
    for (const auto& a : admissible) {
      if (a == *canonical) return a;
    }
  }
  out_of_space("trainable_layers", v.is_string() ? v.get<std::string>() : v.dump(),
               render_list(admissible));
}

inline std::string strip_fences(std::string_view text) {
  std::string out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(start, nl - start);
    if (trim(line).substr(0, 3) != "```") {
      out.append(line);
      out.push_back('\n');
    }
    start = nl + 1;
  }
  return std::string(trim(out));
}

inline std::size_t find_marker(std::string_view text, std::size_t from = 0) {
  const std::string lower = to_lower(text);
  return lower.find("explanation:", from);
}

/// Text after the marker at `m`, without markdown emphasis closing it.
inline std::string_view after_marker(std::string_view text, std::size_t m) {
  text.remove_prefix(m + std::string_view("explanation:").size());
  while (!text.empty() && (text.front() == '*' || text.front() == '_')) text.remove_prefix(1);
  return text;
}

}  // namespace detail

/// Extracts and validates the recommendation object from an LLM reply.
/// Leading prose (e.g. reasoning sections) and code fences are tolerated.
inline Recommendation parse_recommendation(std::string_view raw, const SearchSpace& space) {
  const auto& keys = recommendation_keys();
  const auto found = detail::find_json_object(raw, keys);
  if (!found) {
    throw Error(ErrorCode::kFormatError, "reply contains no JSON object");
  }
  const nlohmann::json& obj = found->value;

  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& k : keys) {
    if (!obj.contains(k)) missing.push_back(k);
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      extra.push_back(it.key());
    }
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg;
    if (!missing.empty()) msg += fmt::format("missing keys [{}]", fmt::join(missing, ", "));
    if (!extra.empty()) {
      msg += fmt::format("{}unexpected keys [{}]", msg.empty() ? "" : "; ",
                         fmt::join(extra, ", "));
    }
    std::vector<std::string> all = missing;
    all.insert(all.end(), extra.begin(), extra.end());
    throw Error(ErrorCode::kKeyError, msg, fmt::format("{}", fmt::join(all, ",")));
  }

  Recommendation rec;
  rec.raw_output = std::string(raw);
  HyperparameterConfig& c = rec.config;
  c.base_model = detail::label_of(space.base_model, obj["base_model"], "base_model");
  c.learning_rate = detail::real_of(space.learning_rate, obj["learning_rate"], "learning_rate");
  c.batch_size = detail::integer_of(space.batch_size, obj["batch_size"], "batch_size");
  c.dropout_rate = detail::real_of(space.dropout_rate, obj["dropout_rate"], "dropout_rate");
  c.dense_units = detail::integer_of(space.dense_units, obj["dense_units"], "dense_units");
  c.optimizer = detail::label_of(space.optimizer, obj["optimizer"], "optimizer");
  c.trainable_layers = detail::trainable_layers_of(space.trainable_layers,
                                                   obj["trainable_layers"]);

  std::string_view after = raw.substr(found->end);
  if (const std::size_t m = detail::find_marker(after); m != std::string_view::npos) {
    after = detail::after_marker(after, m);
  }
  rec.explanation = detail::strip_fences(after);
  if (rec.explanation.empty()) {
    // An explanation may precede the object when introduced by the marker.
    const std::string_view before = raw.substr(0, found->begin);
    if (const std::size_t m = detail::find_marker(before); m != std::string_view::npos) {
      rec.explanation = detail::strip_fences(detail::after_marker(before, m));
    }
  }
  if (rec.explanation.empty()) {
    throw Error(ErrorCode::kMissingExplanation,
                "reply has no explanation after the JSON object");
  }
  return rec;
}

}  // namespace metarec
