// Copyright 2026 The mtal Authors.
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

#ifndef MTAL_ERROR_H_
#define MTAL_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtal {

// Machine-checkable failure categories. Every exception thrown by the library
// carries one of these so callers (the CLI and the HTTP layer in particular)
// can map failures to exit codes and status codes without parsing messages.
enum class ErrorCode {
  kMalformedLine,
  kInvalidBio,
  kMissingPredicate,
  kUnknownLabel,
  kDuplicateId,
  kInvalidConfig,
  kShapeMismatch,
  kTagOutOfRange,
  kEmptySentence,
  kMissingLabels,
  kEmptyTrainingSet,
  kNotNormalized,
  kUnknownStrategy,
  kLengthMismatch,
  kUnknownId,
  kNotInFlight,
  kNoModel,
  kEmptyPool,
  kTrainingInProgress,
  kIo,
  kBadCheckpoint,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mtal

#endif  // MTAL_ERROR_H_
