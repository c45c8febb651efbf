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

#include "verimix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "verimix/error.hpp"
#include "verimix/rng.hpp"

namespace verimix {

namespace {

[[noreturn]] void dim_error(const std::string& op, const Shape& a,
                            const Shape& b) {
  throw Error(ErrorCode::kDimension, op + ": incompatible shapes " +
                                         shape_to_string(a) + " and " +
                                         shape_to_string(b));
}

void require_matrix(const std::string& op, const Tensor& t) {
  if (t.rank() != 2) {
    throw Error(ErrorCode::kDimension,
                op + ": expected a matrix, got " + shape_to_string(t.shape));
  }
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape, std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  return out;
}

template <typename F>
Tensor zip(const std::string& op, const Tensor& a, const Tensor& b, F f) {
  if (a.shape != b.shape) dim_error(op, a.shape, b.shape);
  Tensor out(a.shape, std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data[i] = f(a.data[i], b.data[i]);
  }
  return out;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw Error(ErrorCode::kDimension,
                "tensor rank must be 1..3, got " + shape_to_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kDimension,
                  "zero-length dimension in " + shape_to_string(shape));
    }
  }
}

Tensor::Tensor(Shape s, std::vector<double> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
  check_shape(shape);
  if (data.size() != shape_numel(shape)) {
    throw Error(ErrorCode::kDimension,
                "data length " + std::to_string(data.size()) +
                    " does not match shape " + shape_to_string(shape));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::uniform(Shape shape, double bound, Rng& rng) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

Tensor Tensor::normal(Shape shape, double stddev, Rng& rng) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.data) v = stddev * rng.normal();
  return t;
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw Error(ErrorCode::kDimension,
                "item() on non-scalar " + shape_to_string(shape));
  }
  return data[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  if (b.shape[0] != k) dim_error("matmul", a.shape, b.shape);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.data[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b.data.data() + p * n;
      double* orow = out.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.shape[0], c = a.shape[1];
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = a.data[i * c + j];
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip("add", a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double c) {
  return map(a, [c](double x) { return c * x; });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_matrix("add_row", a);
  if (bias.rank() != 1 || bias.size() != a.cols()) {
    dim_error("add_row", a.shape, bias.shape);
  }
  Tensor out = a;
  const std::size_t c = a.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bias.data[i % c];
  return out;
}

Tensor sigmoid(const Tensor& x) {
  // Outputs are clamped to the open interval: past |v| ~ 37 the exact value
  // rounds to 1.0 (or underflows to 0), which would break 0 < sigmoid < 1.
  static constexpr double kHi = 1.0 - 0x1.0p-53;
  static constexpr double kLo = std::numeric_limits<double>::min();
  return map(x, [](double v) {
    double s;
    if (v >= 0.0) {
      s = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      s = e / (1.0 + e);
    }
    return std::clamp(s, kLo, kHi);
  });
}

Tensor exp(const Tensor& x) {
  return map(x, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  for (double v : x.data) {
    if (!(v > 0.0)) {
      throw Error(ErrorCode::kNonFinite, "log of non-positive value");
    }
  }
  return map(x, [](double v) { return std::log(v); });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_matrix("concat_cols", a);
  require_matrix("concat_cols", b);
  if (a.shape[0] != b.shape[0]) dim_error("concat_cols", a.shape, b.shape);
  const std::size_t r = a.shape[0], ca = a.shape[1], cb = b.shape[1];
  Tensor out = Tensor::zeros({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.data.begin() + i * ca, ca, out.data.begin() + i * (ca + cb));
    std::copy_n(b.data.begin() + i * cb, cb,
                out.data.begin() + i * (ca + cb) + ca);
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2 || a.cols() != b.cols()) {
    dim_error("concat_rows", a.shape, b.shape);
  }
  Tensor out = Tensor::zeros({a.rows() + b.rows(), a.cols()});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  if (begin >= end || end > x.shape[0]) {
    throw Error(ErrorCode::kDimension,
                "slice_rows: range [" + std::to_string(begin) + ", " +
                    std::to_string(end) + ") out of bounds for " +
                    shape_to_string(x.shape));
  }
  const std::size_t c = x.shape[1];
  return Tensor({end - begin, c},
                std::vector<double>(x.data.begin() + begin * c,
                                    x.data.begin() + end * c));
}

Tensor normalize_rows(const Tensor& x) {
  if (x.rank() > 2) {
    throw Error(ErrorCode::kDimension, "normalize_rows: rank > 2");
  }
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = l2_norm(x.row(r));
    if (n == 0.0) {
      throw Error(ErrorCode::kDegenerateVector,
                  "zero-norm row " + std::to_string(r));
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) /= n;
  }
  return out;
}

Tensor sum_rows(const Tensor& x) {
  if (x.rank() > 2) throw Error(ErrorCode::kDimension, "sum_rows: rank > 2");
  Tensor out = Tensor::zeros({x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    out.data[r] = s;
  }
  return out;
}

Tensor diag(const Tensor& x) {
  require_matrix("diag", x);
  if (x.shape[0] != x.shape[1]) dim_error("diag", x.shape, x.shape);
  Tensor out = Tensor::zeros({x.shape[0]});
  for (std::size_t i = 0; i < x.shape[0]; ++i) out.data[i] = x.at(i, i);
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  if (x.rank() > 2) {
    throw Error(ErrorCode::kDimension, "log_softmax_rows: rank > 2");
  }
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = row[c] - lse;
  }
  return out;
}

Tensor mean_pool(const Tensor& x) {
  if (x.rank() != 2) {
    throw Error(ErrorCode::kDimension,
                "mean_pool expects n x d, got " + shape_to_string(x.shape));
  }
  const std::size_t n = x.shape[0], d = x.shape[1];
  Tensor out = Tensor::zeros({d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.data[j] += x.data[i * d + j];
  }
  for (double& v : out.data) v /= static_cast<double>(n);
  return out;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimension,
                "cosine_sim: lengths " + std::to_string(u.size()) + " and " +
                    std::to_string(v.size()));
  }
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorCode::kDegenerateVector, "cosine_sim: zero-norm input");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

double cosine_sim(const Tensor& u, const Tensor& v) {
  return cosine_sim(std::span<const double>(u.data),
                    std::span<const double>(v.data));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data == b.data;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) dim_error("max_abs_diff", a.shape, b.shape);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace verimix
