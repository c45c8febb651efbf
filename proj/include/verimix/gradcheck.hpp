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

#ifndef VERIMIX_GRADCHECK_HPP_
#define VERIMIX_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace verimix {

/// Scalar objective over a flat parameter vector. When `grad` is non-empty
/// the callee also writes the analytic gradient into it (same length as x).
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares the analytic gradient of f at x against central differences
/// (f(x+eps e_i) - f(x-eps e_i)) / (2 eps) for every coordinate. The error
/// per coordinate is |analytic - numeric| / max(1e-12, |numeric|).
GradCheckResult finite_diff_report(const Objective& f,
                                   std::span<const double> x, double eps);

/// Max relative error from finite_diff_report.
double finite_diff_check(const Objective& f, std::span<const double> x,
                         double eps);

}  // namespace verimix

#endif  // VERIMIX_GRADCHECK_HPP_
