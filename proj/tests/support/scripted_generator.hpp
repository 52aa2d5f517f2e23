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

// In-process text generator that replays canned replies.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "metarec.hpp"

namespace metarec::testing {

class ScriptedGenerator : public TextGenerator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> replies, double latency = 0.01)
      : replies_(std::move(replies)), latency_(latency) {}

  Completion generate(const std::string& prompt) override {
    prompts.push_back(prompt);
    const std::size_t i = std::min(calls++, replies_.size() - 1);
    return {replies_[i], latency_};
  }
  std::string model_name() const override { return "scripted"; }
  double temperature() const override { return 0.0; }

  std::size_t calls = 0;
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
  double latency_;
};

}  // namespace metarec::testing
