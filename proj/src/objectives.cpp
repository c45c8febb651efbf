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

#include "verimix/objectives.hpp"

#include <cmath>
#include <string>

#include "verimix/error.hpp"

namespace verimix {

void BatchRepresentations::validate() const {
  if (img.rank() != 2 || txt.rank() != 2 || img.shape != txt.shape) {
    throw Error(ErrorCode::kDimension,
                "batch representations: img " + shape_to_string(img.shape) +
                    " vs txt " + shape_to_string(txt.shape));
  }
  for (const Tensor* t : {&img, &txt}) {
    for (std::size_t r = 0; r < t->rows(); ++r) {
      if (l2_norm(t->row(r)) == 0.0) {
        throw Error(ErrorCode::kDegenerateVector,
                    "zero-norm representation in row " + std::to_string(r));
      }
    }
  }
}

Var similarity_matrix(Graph& g, Var img, Var txt, SimilarityMode mode,
                      double tau) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau must be positive");
  }
  const Var cos = g.matmul(g.normalize_rows(img),
                           g.transpose(g.normalize_rows(txt)));
  if (mode == SimilarityMode::kRawCosine) return cos;
  return g.exp(g.scale(cos, 1.0 / tau));
}

Var creg_loss(Graph& g, Var s) {
  const Tensor& t = g.value(s);
  if (t.rank() != 2 || t.shape[0] != t.shape[1]) {
    throw Error(ErrorCode::kDimension,
                "creg_loss: similarity must be square, got " +
                    shape_to_string(t.shape));
  }
  for (double v : t.data) {
    if (!(v > 0.0)) {
      throw Error(ErrorCode::kInvalidSimilarity,
                  "creg_loss: similarity entries must be positive; raw cosine "
                  "can be <= 0, use exp-cosine mode");
    }
  }
  const double b = static_cast<double>(t.shape[0]);
  const Var log_diag = g.log(g.diag(s));
  const Var log_row = g.log(g.sum_rows(s));                // sum_j S_ij
  const Var log_col = g.log(g.sum_rows(g.transpose(s)));   // sum_j S_ji
  const Var terms =
      g.sub(g.add(log_diag, log_diag), g.add(log_col, log_row));
  return g.scale(g.sum(terms), -1.0 / (2.0 * b));
}

Var generation_loss(Graph& g, Var logits,
                    const std::vector<std::size_t>& targets) {
  const Tensor& t = g.value(logits);
  if (t.rank() != 2 || targets.size() != t.rows()) {
    throw Error(ErrorCode::kDimension,
                "generation_loss: " + std::to_string(targets.size()) +
                    " targets for logits " + shape_to_string(t.shape));
  }
  for (std::size_t id : targets) {
    if (id >= t.cols()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "generation_loss: target id " + std::to_string(id) +
                      " >= vocabulary size " + std::to_string(t.cols()));
    }
  }
  return g.scale(g.mean(g.pick(g.log_softmax_rows(logits), targets)), -1.0);
}

Var stage1_objective(Graph& g, Var gen, Var creg, double lambda) {
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  return g.add(gen, g.scale(creg, lambda));
}

SimilarityMatrix similarity_matrix(const BatchRepresentations& reps,
                                   SimilarityMode mode, double tau) {
  reps.validate();
  Graph g;
  const Var s = similarity_matrix(g, g.constant(reps.img),
                                  g.constant(reps.txt), mode, tau);
  return {g.value(s), mode, tau};
}

double creg_loss(const SimilarityMatrix& s) {
  Graph g;
  return g.value(creg_loss(g, g.constant(s.s))).item();
}

double generation_loss(const Tensor& logits,
                       const std::vector<std::size_t>& targets) {
  Graph g;
  return g.value(generation_loss(g, g.constant(logits), targets)).item();
}

double stage1_objective(double gen, double creg, double lambda) {
  if (!(lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  }
  return gen + lambda * creg;
}

}  // namespace verimix
