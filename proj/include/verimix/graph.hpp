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

#ifndef VERIMIX_GRAPH_HPP_
#define VERIMIX_GRAPH_HPP_

#include <cstddef>
#include <vector>

#include "verimix/tensor.hpp"

namespace verimix {

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t id = 0;
};

enum class OpKind {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kAddRow,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kExp,
  kLog,
  kBlend,
  kMeanPool,
  kMean,
  kSum,
  kSumRows,
  kConcatCols,
  kConcatRows,
  kSliceRows,
  kNormalizeRows,
  kDiag,
  kLogSoftmaxRows,
  kPick,
};

const char* op_name(OpKind kind);

/// Reverse-mode tape over a closed op set.
///
/// Every op computes its value eagerly and appends a record, so the record
/// list is topologically ordered by construction. A record remembers whether
/// any input requires a gradient; backward() skips records that do not.
/// Leaves are copied in; their gradients are read back with grad().
class Graph {
 public:
  struct Record {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    double constant = 0.0;                 // kScale factor
    std::size_t begin = 0, end = 0;        // kSliceRows range
    std::vector<std::size_t> indices;      // kPick targets
  };

  /// Leaf that takes part in differentiation iff t.requires_grad.
  Var leaf(const Tensor& t);
  Var param(Tensor t);     // leaf with requires_grad forced on
  Var constant(Tensor t);  // leaf with requires_grad forced off

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var add_row(Var a, Var bias);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var sigmoid(Var x);
  Var exp(Var x);
  Var log(Var x);
  /// (1 - w) * a + w * b elementwise, clamped to the segment.
  Var blend(Var a, Var b, Var w);
  Var mean_pool(Var x);
  Var mean(Var x);
  Var sum(Var x);
  Var sum_rows(Var x);
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var x, std::size_t begin, std::size_t end);
  Var normalize_rows(Var x);
  Var diag(Var x);
  Var log_softmax_rows(Var x);
  /// out[t] = x[t, indices[t]].
  Var pick(Var x, std::vector<std::size_t> indices);

  const Tensor& value(Var v) const { return records_.at(v.id).value; }
  bool requires_grad(Var v) const { return records_.at(v.id).requires_grad; }

  /// Populates gradients of `loss` (must be a scalar) with respect to every
  /// recorded value. Leaves that requested gradients but do not reach the
  /// loss end up with zero gradient.
  void backward(Var loss);

  /// Gradient buffer for v after backward(); zeros if v was not reached.
  const std::vector<double>& grad(Var v) const;

  /// Copy of the leaf value with `grad` populated.
  Tensor tensor_with_grad(Var v) const;

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  Var push(Record r);
  bool any_requires(std::initializer_list<Var> vs) const;

  std::vector<Record> records_;
  std::vector<std::vector<double>> grads_;
  bool has_backward_ = false;
};

}  // namespace verimix

#endif  // VERIMIX_GRAPH_HPP_
