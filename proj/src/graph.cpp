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

#include "verimix/graph.hpp"

#include <algorithm>
#include <cmath>

#include "verimix/error.hpp"

namespace verimix {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kBlend: return "blend";
    case OpKind::kMeanPool: return "mean_pool";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kNormalizeRows: return "normalize_rows";
    case OpKind::kDiag: return "diag";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kPick: return "pick";
  }
  return "?";
}

Var Graph::push(Record r) {
  records_.push_back(std::move(r));
  has_backward_ = false;
  return Var{records_.size() - 1};
}

bool Graph::any_requires(std::initializer_list<Var> vs) const {
  for (Var v : vs) {
    if (records_.at(v.id).requires_grad) return true;
  }
  return false;
}

Var Graph::leaf(const Tensor& t) {
  Record r;
  r.kind = OpKind::kLeaf;
  r.value = Tensor(t.shape, t.data, t.requires_grad);
  r.requires_grad = t.requires_grad;
  return push(std::move(r));
}

Var Graph::param(Tensor t) {
  t.requires_grad = true;
  t.grad.reset();
  return leaf(t);
}

Var Graph::constant(Tensor t) {
  t.requires_grad = false;
  t.grad.reset();
  return leaf(t);
}

#define VMX_UNARY(method, kernel, op)              \
  Var Graph::method(Var x) {                       \
    Record r;                                      \
    r.kind = op;                                   \
    r.inputs = {x.id};                             \
    r.value = verimix::kernel(value(x));           \
    r.requires_grad = any_requires({x});           \
    return push(std::move(r));                     \
  }

#define VMX_BINARY(method, kernel, op)             \
  Var Graph::method(Var a, Var b) {                \
    Record r;                                      \
    r.kind = op;                                   \
    r.inputs = {a.id, b.id};                       \
    r.value = verimix::kernel(value(a), value(b)); \
    r.requires_grad = any_requires({a, b});        \
    return push(std::move(r));                     \
  }

VMX_BINARY(matmul, matmul, OpKind::kMatMul)
VMX_UNARY(transpose, transpose, OpKind::kTranspose)
VMX_BINARY(add, add, OpKind::kAdd)
VMX_BINARY(add_row, add_row, OpKind::kAddRow)
VMX_BINARY(sub, sub, OpKind::kSub)
VMX_BINARY(mul, mul, OpKind::kMul)
VMX_UNARY(sigmoid, sigmoid, OpKind::kSigmoid)
VMX_UNARY(exp, exp, OpKind::kExp)
VMX_UNARY(log, log, OpKind::kLog)
VMX_UNARY(mean_pool, mean_pool, OpKind::kMeanPool)
VMX_UNARY(sum_rows, sum_rows, OpKind::kSumRows)
VMX_BINARY(concat_cols, concat_cols, OpKind::kConcatCols)
VMX_BINARY(concat_rows, concat_rows, OpKind::kConcatRows)
VMX_UNARY(normalize_rows, normalize_rows, OpKind::kNormalizeRows)
VMX_UNARY(diag, diag, OpKind::kDiag)
VMX_UNARY(log_softmax_rows, log_softmax_rows, OpKind::kLogSoftmaxRows)

#undef VMX_UNARY
#undef VMX_BINARY

Var Graph::scale(Var a, double c) {
  Record r;
  r.kind = OpKind::kScale;
  r.inputs = {a.id};
  r.value = verimix::scale(value(a), c);
  r.constant = c;
  r.requires_grad = any_requires({a});
  return push(std::move(r));
}

Var Graph::blend(Var a, Var b, Var w) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const Tensor& tw = value(w);
  if (ta.shape != tb.shape || ta.shape != tw.shape) {
    throw Error(ErrorCode::kDimension,
                "blend: shapes " + shape_to_string(ta.shape) + ", " +
                    shape_to_string(tb.shape) + ", " +
                    shape_to_string(tw.shape));
  }
  Record r;
  r.kind = OpKind::kBlend;
  r.inputs = {a.id, b.id, w.id};
  r.value = Tensor::zeros(ta.shape);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    // w*b + (1-w)*a is exact at w = 0.5; the clamp keeps rounding from
    // stepping outside [min(a,b), max(a,b)] elsewhere.
    const double x = ta.data[i], y = tb.data[i], w = tw.data[i];
    r.value.data[i] =
        std::clamp(w * y + (1.0 - w) * x, std::min(x, y), std::max(x, y));
  }
  r.requires_grad = any_requires({a, b, w});
  return push(std::move(r));
}

Var Graph::mean(Var x) {
  const Tensor& t = value(x);
  double s = 0.0;
  for (double v : t.data) s += v;
  Record r;
  r.kind = OpKind::kMean;
  r.inputs = {x.id};
  r.value = Tensor::scalar(s / static_cast<double>(t.size()));
  r.requires_grad = any_requires({x});
  return push(std::move(r));
}

Var Graph::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).data) s += v;
  Record r;
  r.kind = OpKind::kSum;
  r.inputs = {x.id};
  r.value = Tensor::scalar(s);
  r.requires_grad = any_requires({x});
  return push(std::move(r));
}

Var Graph::slice_rows(Var x, std::size_t begin, std::size_t end) {
  Record r;
  r.kind = OpKind::kSliceRows;
  r.inputs = {x.id};
  r.value = verimix::slice_rows(value(x), begin, end);
  r.begin = begin;
  r.end = end;
  r.requires_grad = any_requires({x});
  return push(std::move(r));
}

Var Graph::pick(Var x, std::vector<std::size_t> indices) {
  const Tensor& t = value(x);
  if (t.rank() != 2 || indices.size() != t.rows()) {
    throw Error(ErrorCode::kDimension,
                "pick: " + std::to_string(indices.size()) +
                    " indices for " + shape_to_string(t.shape));
  }
  Record r;
  r.kind = OpKind::kPick;
  r.inputs = {x.id};
  r.value = Tensor::zeros({indices.size()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= t.cols()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pick: index " + std::to_string(indices[i]) +
                      " out of range for width " + std::to_string(t.cols()));
    }
    r.value.data[i] = t.at(i, indices[i]);
  }
  r.indices = std::move(indices);
  r.requires_grad = any_requires({x});
  return push(std::move(r));
}

void Graph::backward(Var loss) {
  const Record& root = records_.at(loss.id);
  if (!root.value.is_scalar()) {
    throw Error(ErrorCode::kDimension,
                "backward: loss must be scalar, got " +
                    shape_to_string(root.value.shape));
  }
  grads_.assign(records_.size(), {});
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].requires_grad) {
      grads_[i].assign(records_[i].value.size(), 0.0);
    }
  }
  has_backward_ = true;
  if (!root.requires_grad) return;
  grads_[loss.id][0] = 1.0;

  auto acc = [this](std::size_t id) -> std::vector<double>* {
    return records_[id].requires_grad ? &grads_[id] : nullptr;
  };

  for (std::size_t k = loss.id + 1; k-- > 0;) {
    const Record& rec = records_[k];
    if (!rec.requires_grad || rec.kind == OpKind::kLeaf) continue;
    const std::vector<double>& g = grads_[k];
    const Tensor& y = rec.value;

    switch (rec.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = records_[rec.inputs[0]].value;
        const Tensor& b = records_[rec.inputs[1]].value;
        const std::size_t m = a.shape[0], kk = a.shape[1], n = b.shape[1];
        if (auto* ga = acc(rec.inputs[0])) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j)
                s += g[i * n + j] * b.data[p * n + j];
              (*ga)[i * kk + p] += s;
            }
        }
        if (auto* gb = acc(rec.inputs[1])) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < kk; ++p) {
              const double aip = a.data[i * kk + p];
              for (std::size_t j = 0; j < n; ++j)
                (*gb)[p * n + j] += aip * g[i * n + j];
            }
        }
        break;
      }
      case OpKind::kTranspose: {
        if (auto* ga = acc(rec.inputs[0])) {
          const std::size_t r = y.shape[1], c = y.shape[0];
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              (*ga)[i * c + j] += g[j * r + i];
        }
        break;
      }
      case OpKind::kAdd: {
        for (std::size_t in : rec.inputs)
          if (auto* gi = acc(in))
            for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
        break;
      }
      case OpKind::kAddRow: {
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = acc(rec.inputs[1])) {
          const std::size_t c = y.cols();
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % c] += g[i];
        }
        break;
      }
      case OpKind::kSub: {
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = acc(rec.inputs[1]))
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = records_[rec.inputs[0]].value;
        const Tensor& b = records_[rec.inputs[1]].value;
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*ga)[i] += g[i] * b.data[i];
        if (auto* gb = acc(rec.inputs[1]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gb)[i] += g[i] * a.data[i];
        break;
      }
      case OpKind::kScale: {
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*ga)[i] += rec.constant * g[i];
        break;
      }
      case OpKind::kSigmoid: {
        if (auto* gx = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gx)[i] += g[i] * y.data[i] * (1.0 - y.data[i]);
        break;
      }
      case OpKind::kExp: {
        if (auto* gx = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gx)[i] += g[i] * y.data[i];
        break;
      }
      case OpKind::kLog: {
        const Tensor& x = records_[rec.inputs[0]].value;
        if (auto* gx = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gx)[i] += g[i] / x.data[i];
        break;
      }
      case OpKind::kBlend: {
        const Tensor& a = records_[rec.inputs[0]].value;
        const Tensor& b = records_[rec.inputs[1]].value;
        const Tensor& w = records_[rec.inputs[2]].value;
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*ga)[i] += g[i] * (1.0 - w.data[i]);
        if (auto* gb = acc(rec.inputs[1]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gb)[i] += g[i] * w.data[i];
        if (auto* gw = acc(rec.inputs[2]))
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gw)[i] += g[i] * (b.data[i] - a.data[i]);
        break;
      }
      case OpKind::kMeanPool: {
        if (auto* gx = acc(rec.inputs[0])) {
          const Tensor& x = records_[rec.inputs[0]].value;
          const std::size_t n = x.shape[0], d = x.shape[1];
          const double inv = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gx)[i * d + j] += g[j] * inv;
        }
        break;
      }
      case OpKind::kMean: {
        if (auto* gx = acc(rec.inputs[0])) {
          const double s = g[0] / static_cast<double>(gx->size());
          for (double& v : *gx) v += s;
        }
        break;
      }
      case OpKind::kSum: {
        if (auto* gx = acc(rec.inputs[0]))
          for (double& v : *gx) v += g[0];
        break;
      }
      case OpKind::kSumRows: {
        if (auto* gx = acc(rec.inputs[0])) {
          const std::size_t c = records_[rec.inputs[0]].value.cols();
          for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g[i / c];
        }
        break;
      }
      case OpKind::kConcatCols: {
        const std::size_t ca = records_[rec.inputs[0]].value.cols();
        const std::size_t cb = records_[rec.inputs[1]].value.cols();
        const std::size_t rows = y.shape[0];
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < ca; ++j)
              (*ga)[i * ca + j] += g[i * (ca + cb) + j];
        if (auto* gb = acc(rec.inputs[1]))
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cb; ++j)
              (*gb)[i * cb + j] += g[i * (ca + cb) + ca + j];
        break;
      }
      case OpKind::kConcatRows: {
        const std::size_t na = records_[rec.inputs[0]].value.size();
        if (auto* ga = acc(rec.inputs[0]))
          for (std::size_t i = 0; i < na; ++i) (*ga)[i] += g[i];
        if (auto* gb = acc(rec.inputs[1]))
          for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[na + i];
        break;
      }
      case OpKind::kSliceRows: {
        if (auto* gx = acc(rec.inputs[0])) {
          const std::size_t c = y.cols();
          for (std::size_t i = 0; i < g.size(); ++i)
            (*gx)[rec.begin * c + i] += g[i];
        }
        break;
      }
      case OpKind::kNormalizeRows: {
        if (auto* gx = acc(rec.inputs[0])) {
          const Tensor& x = records_[rec.inputs[0]].value;
          const std::size_t c = x.cols();
          for (std::size_t r = 0; r < x.rows(); ++r) {
            const double n = l2_norm(x.row(r));
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              dot += y.data[r * c + j] * g[r * c + j];
            for (std::size_t j = 0; j < c; ++j)
              (*gx)[r * c + j] += (g[r * c + j] - y.data[r * c + j] * dot) / n;
          }
        }
        break;
      }
      case OpKind::kDiag: {
        if (auto* gx = acc(rec.inputs[0])) {
          const std::size_t n = y.size();
          for (std::size_t i = 0; i < n; ++i) (*gx)[i * n + i] += g[i];
        }
        break;
      }
      case OpKind::kLogSoftmaxRows: {
        if (auto* gx = acc(rec.inputs[0])) {
          const std::size_t c = y.cols();
          for (std::size_t r = 0; r < y.rows(); ++r) {
            double gs = 0.0;
            for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
            for (std::size_t j = 0; j < c; ++j)
              (*gx)[r * c + j] +=
                  g[r * c + j] - std::exp(y.data[r * c + j]) * gs;
          }
        }
        break;
      }
      case OpKind::kPick: {
        if (auto* gx = acc(rec.inputs[0])) {
          const std::size_t c = records_[rec.inputs[0]].value.cols();
          for (std::size_t i = 0; i < rec.indices.size(); ++i)
            (*gx)[i * c + rec.indices[i]] += g[i];
        }
        break;
      }
    }
  }
}

const std::vector<double>& Graph::grad(Var v) const {
  if (!has_backward_) {
    throw Error(ErrorCode::kInvalidArgument, "grad() before backward()");
  }
  const auto& g = grads_.at(v.id);
  if (g.empty() && !records_[v.id].requires_grad) {
    throw Error(ErrorCode::kInvalidArgument,
                "grad() on a value that does not require grad");
  }
  return g;
}

Tensor Graph::tensor_with_grad(Var v) const {
  Tensor t = value(v);
  t.requires_grad = records_.at(v.id).requires_grad;
  if (t.requires_grad && has_backward_) t.grad = grads_.at(v.id);
  return t;
}

}  // namespace verimix
