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

#ifndef SASV_MATRIX_HPP_
#define SASV_MATRIX_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sasv/error.hpp"

namespace sasv {

/// Dense row-major matrix of doubles. Rows are exposed as spans.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double Norm(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

/// Row-normalized copy plus the original row norms. Throws InvalidBatch on a
/// zero row.
inline Matrix NormalizeRows(const Matrix& m, std::vector<double>* norms) {
  Matrix out(m.rows(), m.cols());
  if (norms) norms->assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double n = Norm(m.row(r));
    if (!(n > 0.0) || !std::isfinite(n))
      throw Error(ErrorKind::kInvalidBatch,
                  "row " + std::to_string(r) + " has zero or non-finite norm");
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / n;
    if (norms) (*norms)[r] = n;
  }
  return out;
}

/// Backward pass of u = v / |v|: maps dL/du to dL/dv in place.
inline void NormalizeBackward(std::span<const double> unit, double norm,
                              std::span<double> grad) {
  double proj = Dot(grad, unit);
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad[i] = (grad[i] - proj * unit[i]) / norm;
}

}  // namespace sasv

#endif  // SASV_MATRIX_HPP_
