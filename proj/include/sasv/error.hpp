// Copyright 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_ERROR_HPP_
#define SASV_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sasv {

enum class ErrorKind {
  kParse,
  kIo,
  kDimensionMismatch,
  kDimensionDrift,
  kZeroNorm,
  kNonFinite,
  kEmptyId,
  kDuplicateId,
  kMissingEmbedding,
  kUnlabeledTrial,
  kEmptyCohort,
  kEmptyList,
  kEmptyClass,
  kTrialMismatch,
  kBadWeights,
  kBadConfig,
  kInvalidBatch,
  kValueOutOfRange,
  kBadK,
  kBadParams,
  kTooFewSpeakers,
  kDivergence,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kDimensionDrift: return "DimensionDrift";
    case ErrorKind::kZeroNorm: return "ZeroNorm";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kEmptyId: return "EmptyId";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kMissingEmbedding: return "MissingEmbedding";
    case ErrorKind::kUnlabeledTrial: return "UnlabeledTrial";
    case ErrorKind::kEmptyCohort: return "EmptyCohort";
    case ErrorKind::kEmptyList: return "EmptyList";
    case ErrorKind::kEmptyClass: return "EmptyClass";
    case ErrorKind::kTrialMismatch: return "TrialMismatch";
    case ErrorKind::kBadWeights: return "BadWeights";
    case ErrorKind::kBadConfig: return "BadConfig";
    case ErrorKind::kInvalidBatch: return "InvalidBatch";
    case ErrorKind::kValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::kBadK: return "BadK";
    case ErrorKind::kBadParams: return "BadParams";
    case ErrorKind::kTooFewSpeakers: return "TooFewSpeakers";
    case ErrorKind::kDivergence: return "DivergenceDetected";
  }
  return "Error";
}

/// Every failure in the toolkit is reported as an Error carrying its kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failures remember where they happened. `line` is 1-based for text
/// inputs; `offset` is a byte offset for binary inputs. Unknown is 0 / npos.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, const std::string& source, std::size_t line,
             std::size_t offset, const std::string& what)
      : Error(kind, Locate(source, line, offset) + what),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

  static constexpr std::size_t kNoOffset = static_cast<std::size_t>(-1);

 private:
  static std::string Locate(const std::string& source, std::size_t line,
                            std::size_t offset) {
    std::string where = source.empty() ? "<input>" : source;
    if (line > 0) where += ":" + std::to_string(line);
    if (offset != kNoOffset) where += " @byte " + std::to_string(offset);
    return where + ": ";
  }

  std::size_t line_;
  std::size_t offset_;
};

}  // namespace sasv

#endif  // SASV_ERROR_HPP_
