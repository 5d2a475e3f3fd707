// Copyright 2026 The qelim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace qelim {

/// Failure categories. The CLI maps each category onto a stable exit code.
enum class ErrorKind {
  kShape,
  kInvalidArgument,
  kConfigMismatch,
  kConfigParse,
  kSingularMatrix,
  kNotPositiveDefinite,
  kDimensionTooSmall,
  kTokenOutOfRange,
  kSequenceTooLong,
  kConditioningFailure,
  kBadMagic,
  kVersionMismatch,
  kTruncatedFile,
  kChecksumMismatch,
  kNotZeroMean,
  kOutsideImageBall,
  kZeroEntryInV,
  kConditionNotSatisfied,
  kSubsetTooSmall,
  kWidthTooLargeForExhaustiveSearch,
  kAllTargetsDegenerate,
  kIo,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by LU-based routines; carries the offending pivot magnitude.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(double pivot, const std::string& what)
      : Error(ErrorKind::kSingularMatrix, what), pivot_(pivot) {}

  double pivot() const noexcept { return pivot_; }

 private:
  double pivot_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace qelim
