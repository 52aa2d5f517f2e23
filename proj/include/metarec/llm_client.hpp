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
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <utility>

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"
#include "metarec/error.hpp"

namespace metarec {

inline constexpr const char* kDefaultLlmUrl = "http://127.0.0.1:11434";
inline constexpr const char* kLlmUrlEnv = "METAREC_LLM_URL";

struct LlmEndpointConfig {
  std::string base_url = kDefaultLlmUrl;
  std::string model = "deepseek-coder:6.7b";
  double temperature = 0.1;
  double timeout_seconds = 120.0;
  int max_retries = 2;
  double initial_backoff_seconds = 0.5;  // doubled after every failed attempt

  void validate() const {
    if (!(timeout_seconds > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0", "timeout");
    }
    if (max_retries < 0) {
      throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0", "max_retries");
    }
    if (temperature < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0", "temperature");
    }
  }

  /// Returns `url` if non-empty, else $METAREC_LLM_URL, else the default.
  static std::string resolve_url(const std::string& url = {}) {
    if (!url.empty()) return url;
    if (const char* env = std::getenv(kLlmUrlEnv); env != nullptr && *env != '\0') {
      return env;
    }
    return kDefaultLlmUrl;
  }
};

struct Completion {
  std::string text;
  double latency_seconds = 0.0;
};

/// Anything that turns a prompt into a completion.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual Completion generate(const std::string& prompt) = 0;
  virtual std::string model_name() const = 0;
  virtual double temperature() const = 0;
};

/// Request/response shape of one server family.
struct WireAdapter {
  std::string path;
  std::function<nlohmann::json(const LlmEndpointConfig&, const std::string& prompt)> request;
  std::function<std::string(const nlohmann::json& response)> completion;

  /// POST /api/generate {model, prompt, stream:false, options:{temperature}}
  /// -> response["response"].
  static WireAdapter ollama() {
    return {"/api/generate",
            [](const LlmEndpointConfig& cfg, const std::string& prompt) {
              return nlohmann::json{{"model", cfg.model},
                                    {"prompt", prompt},
                                    {"stream", false},
                                    {"options", {{"temperature", cfg.temperature}}}};
            },
            [](const nlohmann::json& r) { return r.at("response").get<std::string>(); }};
  }

  /// OpenAI-style /v1/completions (llama.cpp server, vLLM, ...).
  static WireAdapter openai_completions() {
    return {"/v1/completions",
            [](const LlmEndpointConfig& cfg, const std::string& prompt) {
              return nlohmann::json{{"model", cfg.model},
                                    {"prompt", prompt},
                                    {"stream", false},
                                    {"temperature", cfg.temperature}};
            },
            [](const nlohmann::json& r) {
              return r.at("choices").at(0).at("text").get<std::string>();
            }};
  }
};

/// HTTP client for a locally hosted inference server. Each call opens its
/// own connection, so one instance may serve concurrent callers.
class HttpGenerator : public TextGenerator {
 public:
  explicit HttpGenerator(LlmEndpointConfig config, WireAdapter adapter = WireAdapter::ollama())
      : config_(std::move(config)), adapter_(std::move(adapter)) {
    config_.validate();
    split_url();
  }

  Completion generate(const std::string& prompt) override {
    using Clock = std::chrono::steady_clock;
    const std::string body = adapter_.request(config_, prompt).dump();
    const std::string path = path_prefix_ + adapter_.path;
    double transport_seconds = 0.0;
    double backoff = config_.initial_backoff_seconds;
    std::string last_failure;

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2.0;
      }
      httplib::Client client(host_);
      const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::duration<double>(config_.timeout_seconds));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);

      const auto start = Clock::now();
      auto res = client.Post(path, body, "application/json");
      const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
      transport_seconds += elapsed;

      if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                                elapsed >= 0.9 * config_.timeout_seconds);
        if (timed_out) {
          throw Error(ErrorCode::kTimeoutError,
                      fmt::format("no reply from {} within {} s", config_.base_url,
                                  config_.timeout_seconds));
        }
        last_failure = httplib::to_string(err);
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        try {
          return {adapter_.completion(nlohmann::json::parse(res->body)), transport_seconds};
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kServerError,
                      std::string("malformed completion response: ") + e.what(),
                      std::to_string(res->status));
        }
      }
      if (res->status >= 500 || res->status == 429) {
        last_failure = fmt::format("HTTP {}", res->status);
        continue;
      }
      throw Error(ErrorCode::kServerError,
                  fmt::format("server answered HTTP {}: {}", res->status, res->body),
                  std::to_string(res->status));
    }
    throw Error(ErrorCode::kUnavailable,
                fmt::format("{} unavailable after {} attempt(s), last failure: {}",
                            config_.base_url, config_.max_retries + 1, last_failure));
  }

  std::string model_name() const override { return config_.model; }
  double temperature() const override { return config_.temperature; }
  const LlmEndpointConfig& config() const { return config_; }

 private:
  void split_url() {
    const std::string& url = config_.base_url;
    const auto scheme = url.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', host_start);
    host_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_prefix_ = slash == std::string::npos ? "" : url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  LlmEndpointConfig config_;
  WireAdapter adapter_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace metarec
