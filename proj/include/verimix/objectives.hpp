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

#ifndef VERIMIX_OBJECTIVES_HPP_
#define VERIMIX_OBJECTIVES_HPP_

#include <cstddef>
#include <vector>

#include "verimix/graph.hpp"
#include "verimix/tensor.hpp"

namespace verimix {

// Alignment-stage losses: token cross-entropy plus the symmetric contrastive
// regularizer over mean-pooled image/text representations.

enum class SimilarityMode {
  kExpCosine,  // S_ij = exp(cos(img_i, txt_j) / tau), always positive
  kRawCosine,  // S_ij = cos(img_i, txt_j); may be <= 0
};

struct BatchRepresentations {
  Tensor img;  // b x d_llm
  Tensor txt;  // b x d_llm

  std::size_t batch_size() const { return img.rows(); }
  void validate() const;
};

struct SimilarityMatrix {
  Tensor s;  // b x b
  SimilarityMode mode = SimilarityMode::kExpCosine;
  double tau = 1.0;
};

SimilarityMatrix similarity_matrix(
    const BatchRepresentations& reps,
    SimilarityMode mode = SimilarityMode::kExpCosine, double tau = 1.0);

/// -(1/2b) sum_i [log(S_ii / sum_j S_ji) + log(S_ii / sum_j S_ij)].
/// Rejects non-positive entries with kInvalidSimilarity.
double creg_loss(const SimilarityMatrix& s);

/// Mean of -log softmax(logits)[t, targets[t]].
double generation_loss(const Tensor& logits,
                       const std::vector<std::size_t>& targets);

/// gen + lambda * creg, lambda >= 0.
double stage1_objective(double gen, double creg, double lambda);

// Recorded variants for training.
Var similarity_matrix(Graph& g, Var img, Var txt, SimilarityMode mode,
                      double tau);
Var creg_loss(Graph& g, Var s);
Var generation_loss(Graph& g, Var logits,
                    const std::vector<std::size_t>& targets);
Var stage1_objective(Graph& g, Var gen, Var creg, double lambda);

}  // namespace verimix

#endif  // VERIMIX_OBJECTIVES_HPP_
