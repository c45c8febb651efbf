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

#include "verimix/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "verimix/error.hpp"

namespace verimix {

namespace {

double eval_checked(const Objective& f, std::span<const double> x,
                    std::span<double> grad) {
  const double v = f(x, grad);
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFinite,
                "finite_diff_check: objective returned a non-finite value");
  }
  return v;
}

}  // namespace

GradCheckResult finite_diff_report(const Objective& f,
                                   std::span<const double> x, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "finite_diff_check: eps must be positive");
  }
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> analytic(point.size(), 0.0);
  eval_checked(f, point, analytic);

  GradCheckResult result;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + eps;
    const double fp = eval_checked(f, point, {});
    point[i] = orig - eps;
    const double fm = eval_checked(f, point, {});
    point[i] = orig;

    const double numeric = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max(1e-12, std::abs(numeric));
    if (i == 0 || rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = numeric;
    }
  }
  return result;
}

double finite_diff_check(const Objective& f, std::span<const double> x,
                         double eps) {
  return finite_diff_report(f, x, eps).max_rel_err;
}

}  // namespace verimix
