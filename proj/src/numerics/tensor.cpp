// SPDX-License-Identifier: Apache-2.0
#include "headsteer/numerics/tensor.hpp"

#include <cmath>
#include <string>

#include "headsteer/error.hpp"

namespace headsteer::numerics {

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Vec::Vec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("Vec: length must be positive");
  if (!all_finite(values_)) throw InvalidArgument("Vec: non-finite value");
}

Vec::Vec(std::initializer_list<double> values) : Vec(std::vector<double>(values)) {}

Vec Vec::zeros(std::size_t n) { return Vec(std::vector<double>(n, 0.0)); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0) throw InvalidArgument("Matrix: dimensions must be positive");
  if (values_.size() != rows_ * cols_) {
    throw InvalidArgument("Matrix: expected " + std::to_string(rows_ * cols_) +
                          " values, got " + std::to_string(values_.size()));
  }
  if (!all_finite(values_)) throw InvalidArgument("Matrix: non-finite value");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  if (rows_ == 0 || cols_ == 0) throw InvalidArgument("Matrix: dimensions must be positive");
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("Matrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
  if (!all_finite(values_)) throw InvalidArgument("Matrix: non-finite value");
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace headsteer::numerics
