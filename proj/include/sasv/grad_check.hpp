// Copyright 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_GRAD_CHECK_HPP_
#define SASV_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace sasv {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor) with
  // floor = max(abs_floor, scale_floor * max_i |a_i|). Coordinates whose
  // derivative is tiny next to the largest one are compared on the scale of
  // the gradient, where central-difference rounding noise lives.
  double abs_floor = 1e-6;
  double scale_floor = 1e-3;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> failing;
  std::vector<std::size_t> excluded;
  std::vector<double> numeric;

  bool passed() const { return failing.empty(); }
};

/// Compares `analytic` against central differences of scalar `f` at `point`,
/// coordinate by coordinate. Coordinates listed in `exclude` (known
/// singularities, e.g. active clamps) are skipped and reported as excluded.
template <typename F>
GradCheckReport GradCheck(F&& f, std::span<const double> point, std::span<const double> analytic,
                          const GradCheckOptions& opts = {},
                          std::span<const std::size_t> exclude = {}) {
  GradCheckReport report;
  report.numeric.assign(point.size(), 0.0);
  std::vector<double> x(point.begin(), point.end());
  std::vector<bool> skip(point.size(), false);
  for (std::size_t i : exclude)
    if (i < skip.size()) skip[i] = true;

  double largest = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (!skip[i]) largest = std::max(largest, std::abs(analytic[i]));
  const double floor = std::max(opts.abs_floor, opts.scale_floor * largest);

  for (std::size_t i = 0; i < x.size(); ++i) {
    if (skip[i]) {
      report.excluded.push_back(i);
      continue;
    }
    const double saved = x[i];
    x[i] = saved + opts.step;
    const double up = f(std::span<const double>(x));
    x[i] = saved - opts.step;
    const double down = f(std::span<const double>(x));
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    report.numeric[i] = numeric;
    const double a = analytic[i];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    ++report.checked;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      report.worst_index = i;
    }
    if (!(rel < opts.tolerance)) report.failing.push_back(i);
  }
  return report;
}

}  // namespace sasv

#endif  // SASV_GRAD_CHECK_HPP_
