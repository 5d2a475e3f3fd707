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

#include "qelim/error.hpp"

namespace qelim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kShape: return "ShapeError";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfigMismatch: return "ConfigMismatch";
    case ErrorKind::kConfigParse: return "ConfigParseError";
    case ErrorKind::kSingularMatrix: return "SingularMatrix";
    case ErrorKind::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::kDimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::kTokenOutOfRange: return "TokenOutOfRange";
    case ErrorKind::kSequenceTooLong: return "SequenceTooLong";
    case ErrorKind::kConditioningFailure: return "ConditioningFailure";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kTruncatedFile: return "TruncatedFile";
    case ErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::kNotZeroMean: return "NotZeroMean";
    case ErrorKind::kOutsideImageBall: return "OutsideImageBall";
    case ErrorKind::kZeroEntryInV: return "ZeroEntryInV";
    case ErrorKind::kConditionNotSatisfied: return "ConditionNotSatisfied";
    case ErrorKind::kSubsetTooSmall: return "SubsetTooSmall";
    case ErrorKind::kWidthTooLargeForExhaustiveSearch: return "WidthTooLargeForExhaustiveSearch";
    case ErrorKind::kAllTargetsDegenerate: return "AllTargetsDegenerate";
    case ErrorKind::kIo: return "IoError";
  }
  return "Error";
}

}  // namespace qelim
