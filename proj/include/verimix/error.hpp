// Copyright 2026 The verimix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VERIMIX_ERROR_HPP_
#define VERIMIX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace verimix {

// Numbering matches vmx_status in verimix.h; keep the two in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDimension = 2,
  kDegenerateVector = 3,
  kInvalidLogprob = 4,
  kInvalidSimilarity = 5,
  kParse = 6,
  kIo = 7,
  kTransport = 8,
  kCapability = 9,
  kDivergence = 10,
  kPipelineOrder = 11,
  kConfig = 12,
  kEmptyBenchmark = 13,
  kValidation = 14,
  kNonFinite = 15,
  kInternal = 99,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Remote call failure after exhausting retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts)
      : Error(ErrorCode::kTransport, message), attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace verimix

#endif  // VERIMIX_ERROR_HPP_
