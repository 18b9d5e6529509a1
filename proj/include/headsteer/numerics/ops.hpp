// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "headsteer/numerics/tensor.hpp"

namespace headsteer::numerics {

/// Standard product. Each output element accumulates k = 0..K-1 in order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// out += x * m for a row vector x (length m.rows()) into out (length m.cols()).
void accumulate_row_times_matrix(std::span<const double> x, const Matrix& m,
                                 std::span<double> out);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);

/// In-place softmax over one row.
void softmax_inplace(std::span<double> row);

/// g * x / ||x||. Scalar-gain normalization; output direction equals input direction.
Vec rms_normalize(const Vec& x, double g);
void rms_normalize_into(std::span<const double> x, double g, std::span<double> out);

double euclidean_distance(const Vec& a, const Vec& b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

double squared_norm(std::span<const double> x);
double norm(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

/// <a,b> / (||a|| ||b||), clamped to [-1, 1].
double cosine(const Vec& a, const Vec& b);
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace headsteer::numerics
