// SPDX-License-Identifier: Apache-2.0
#include "headsteer/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/kernels.hpp"

namespace headsteer::numerics {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()) + ")");
  }
  const KernelTable& k = kernels();
  Matrix c = Matrix::zeros(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    k.row_times_matrix(c.row(i).data(), a.row(i).data(), b.values().data(), a.cols(), b.cols());
  }
  return c;
}

void accumulate_row_times_matrix(std::span<const double> x, const Matrix& m,
                                 std::span<double> out) {
  if (x.size() != m.rows() || out.size() != m.cols()) {
    throw InvalidArgument("accumulate_row_times_matrix: shape mismatch");
  }
  const KernelTable& k = kernels();
  k.row_times_matrix(out.data(), x.data(), m.values().data(), m.rows(), m.cols());
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  const KernelTable& k = kernels();
  const double mx = k.max_value(row.data(), row.size());
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dot: length mismatch");
  return kernels().dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> x) { return kernels().dot(x.data(), x.data(), x.size()); }

double norm(std::span<const double> x) { return std::sqrt(squared_norm(x)); }

void rms_normalize_into(std::span<const double> x, double g, std::span<double> out) {
  if (x.size() != out.size()) throw InvalidArgument("rms_normalize: length mismatch");
  const double n = norm(x);
  if (!(n > 0.0)) throw SingularInput("rms_normalize: zero-norm input");
  const double s = g / n;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
}

Vec rms_normalize(const Vec& x, double g) {
  std::vector<double> out(x.size());
  rms_normalize_into(x.values(), g, out);
  return Vec(std::move(out));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("euclidean_distance: length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  return std::sqrt(kernels().squared_distance(a.data(), b.data(), a.size()));
}

double euclidean_distance(const Vec& a, const Vec& b) {
  return euclidean_distance(a.values(), b.values());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine: length mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw SingularInput("cosine: zero-norm argument");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const Vec& a, const Vec& b) { return cosine(a.values(), b.values()); }

}  // namespace headsteer::numerics
