// SPDX-License-Identifier: Apache-2.0
#include "headsteer/numerics/kernels.hpp"

namespace headsteer::numerics::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double* x, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void row_times_matrix(double* y, const double* x, const double* w, std::size_t k,
                      std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) axpy(y, x[p], w + p * m, m);
}

double max_value(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

constexpr KernelTable kTable{SimdLevel::scalar, "scalar", &dot, &squared_distance,
                             &axpy, &scale, &row_times_matrix, &max_value};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace headsteer::numerics::scalar
