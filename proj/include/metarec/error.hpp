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

#include <stdexcept>
#include <string>
#include <string_view>

namespace metarec {

/// Failure categories surfaced by the library. The CLI maps these onto
/// process exit codes (see exit_code_for).
enum class ErrorCode {
  kEmptyDataset,
  kInvalidClassCount,
  kUnknownCategory,
  kParseError,
  kSchemaError,
  kRangeError,
  kIoError,
  kInsufficientData,
  kDimensionError,
  kModelCorrupt,
  kEmptyContext,
  kFormatError,
  kKeyError,
  kOutOfSearchSpace,
  kMissingExplanation,
  kTimeoutError,
  kServerError,
  kUnavailable,
  kJudgeFormatError,
  kJudgeUnavailable,
  kInvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidClassCount: return "InvalidClassCount";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kRangeError: return "RangeError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kModelCorrupt: return "ModelCorrupt";
    case ErrorCode::kEmptyContext: return "EmptyContext";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kKeyError: return "KeyError";
    case ErrorCode::kOutOfSearchSpace: return "OutOfSearchSpace";
    case ErrorCode::kMissingExplanation: return "MissingExplanation";
    case ErrorCode::kTimeoutError: return "TimeoutError";
    case ErrorCode::kServerError: return "ServerError";
    case ErrorCode::kUnavailable: return "Unavailable";
    case ErrorCode::kJudgeFormatError: return "JudgeFormatError";
    case ErrorCode::kJudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// The single exception type thrown by metarec. `subject` carries the
/// offending entity (parameter, field, label) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

// Exit codes: 0 success, 1 validation/parse failure, 2 transport failure,
// 3 input/schema failure.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormatError:
    case ErrorCode::kKeyError:
    case ErrorCode::kOutOfSearchSpace:
    case ErrorCode::kMissingExplanation:
    case ErrorCode::kJudgeFormatError:
      return 1;
    case ErrorCode::kTimeoutError:
    case ErrorCode::kServerError:
    case ErrorCode::kUnavailable:
    case ErrorCode::kJudgeUnavailable:
      return 2;
    default:
      return 3;
  }
}

}  // namespace metarec
