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

#include "verimix/error.hpp"

namespace verimix {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kDegenerateVector: return "degenerate_vector";
    case ErrorCode::kInvalidLogprob: return "invalid_logprob";
    case ErrorCode::kInvalidSimilarity: return "invalid_similarity";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kPipelineOrder: return "pipeline_order";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kEmptyBenchmark: return "empty_benchmark";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace verimix
