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

#ifndef VERIMIX_TENSOR_HPP_
#define VERIMIX_TENSOR_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace verimix {

class Rng;

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles, rank 1 to 3.
///
/// A scalar is a rank-1 tensor of shape {1}. `grad` is only populated by
/// Graph::backward for tensors registered with requires_grad set.
struct Tensor {
  Shape shape{1};
  std::vector<double> data{0.0};
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor identity(std::size_t n);
  static Tensor uniform(Shape shape, double bound, Rng& rng);
  static Tensor normal(Shape shape, double stddev, Rng& rng);

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }
  // rows()/cols() treat a rank-1 tensor as a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : shape[0]; }
  std::size_t cols() const { return shape.back(); }
  bool is_scalar() const { return data.size() == 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }
  double item() const;

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }

  bool all_finite() const;
};

std::size_t shape_numel(const Shape& shape);
void check_shape(const Shape& shape);

// Eager kernels. Graph ops compute their forward values with these.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor normalize_rows(const Tensor& x);
Tensor sum_rows(const Tensor& x);
Tensor diag(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

/// Column-wise mean of an n x d matrix.
Tensor mean_pool(const Tensor& x);

/// <u,v>/(|u||v|). Throws kDegenerateVector when either norm is zero.
double cosine_sim(std::span<const double> u, std::span<const double> v);
double cosine_sim(const Tensor& u, const Tensor& v);

double l2_norm(std::span<const double> v);

/// Elementwise equality of shape and data.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Largest absolute elementwise difference; throws on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace verimix

#endif  // VERIMIX_TENSOR_HPP_
