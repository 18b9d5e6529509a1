// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "headsteer/error.hpp"
#include "headsteer/numerics/ops.hpp"
#include "headsteer/numerics/random.hpp"
#include "headsteer/numerics/stats.hpp"
#include "headsteer/numerics/tensor.hpp"
#include "test_support.hpp"

namespace hs = headsteer;
using hs::numerics::Matrix;
using hs::numerics::Vec;
using namespace hs::numerics;
using hs::testing::random_matrix;
using hs::testing::random_values;
using hs::testing::random_vec;

TEST(Tensor, RejectsNonFiniteAndEmpty) {
  EXPECT_THROW(Vec(std::vector<double>{}), hs::InvalidArgument);
  EXPECT_THROW(Vec({1.0, std::numeric_limits<double>::quiet_NaN()}), hs::InvalidArgument);
  EXPECT_THROW(Vec({std::numeric_limits<double>::infinity()}), hs::InvalidArgument);
  EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), hs::InvalidArgument);
  EXPECT_THROW(Matrix(0, 2, {}), hs::InvalidArgument);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), hs::InvalidArgument);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix m{{1.5, -2}, {3, 4.25}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matmul, HandComputed2x2) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0}, {1}};
  EXPECT_EQ(matmul(a, b), (Matrix{{2}, {4}}));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(11);
  const Matrix a = random_matrix(rng, 5, 7);
  const Matrix b = random_matrix(rng, 7, 3);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, DimensionMismatchRejected) {
  EXPECT_THROW(matmul(Matrix::zeros(2, 3), Matrix::zeros(2, 3)), hs::InvalidArgument);
}

TEST(Softmax, SymmetricRow) {
  const Matrix s = softmax_rows(Matrix{{0, 0}});
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, Log2Row) {
  const Matrix s = softmax_rows(Matrix{{std::log(2.0), 0}});
  EXPECT_NEAR(s(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, MatchesDirectFormula) {
  std::mt19937_64 rng(3);
  const Matrix m = random_matrix(rng, 4, 6, 3.0);
  const Matrix s = softmax_rows(m);
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0;
    for (std::size_t c = 0; c < 6; ++c) z += std::exp(m(r, c));
    double sum = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_NEAR(s(r, c), std::exp(m(r, c)) / z, 1e-12);
      sum += s(r, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, StableUnderLargeSpread) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    auto v = random_values(rng, 9, -300.0, 300.0);
    v[0] = -400.0;
    v[1] = 400.0;
    const Matrix s = softmax_rows(Matrix(1, 9, v));
    double sum = 0;
    for (double x : s.values()) {
      EXPECT_TRUE(std::isfinite(x));
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Normalize, ThreeFourFive) {
  const Vec y = rms_normalize(Vec{3, 4}, 1.0);
  EXPECT_NEAR(y[0], 0.6, 1e-15);
  EXPECT_NEAR(y[1], 0.8, 1e-15);
}

TEST(Normalize, ScaleInvariantAndDirectionPreserving) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> cdist(0.01, 100.0);
  for (int t = 0; t < 100; ++t) {
    const Vec x = random_vec(rng, 16);
    const double c = cdist(rng);
    const double g = cdist(rng);
    std::vector<double> cx(x.values().begin(), x.values().end());
    for (double& v : cx) v *= c;
    const Vec a = rms_normalize(x, g);
    const Vec b = rms_normalize(Vec(cx), g);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * g);
    EXPECT_NEAR(cosine(a, x), 1.0, 1e-12);
    EXPECT_NEAR(norm(a.values()), g, 1e-12 * std::max(1.0, g));
  }
}

TEST(Normalize, ZeroVectorIsSingular) {
  EXPECT_THROW(rms_normalize(Vec{0.0, 0.0}, 1.0), hs::SingularInput);
}

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(euclidean_distance(Vec{0, 0}, Vec{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(euclidean_distance(Vec{1.5, -2}, Vec{1.5, -2}), 0.0);
  EXPECT_THROW(euclidean_distance(Vec{1}, Vec{1, 2}), hs::InvalidArgument);
}

TEST(Distance, MatchesComponentwiseOracle) {
  std::mt19937_64 rng(13);
  const Vec a = random_vec(rng, 64), b = random_vec(rng, 64);
  double s = 0;
  for (std::size_t i = 0; i < 64; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(euclidean_distance(a, b), std::sqrt(s), 1e-12);
}

TEST(Distance, TriangleInequality) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 500; ++t) {
    const Vec a = random_vec(rng, 8), b = random_vec(rng, 8), c = random_vec(rng, 8);
    EXPECT_LE(euclidean_distance(a, c), euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9);
  }
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine(Vec{1, 0}, Vec{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine(Vec{2, 0}, Vec{5, 0}), 1.0);
  EXPECT_THROW(cosine(Vec{0, 0}, Vec{1, 0}), hs::SingularInput);
}

TEST(Cosine, MatchesDirectFormula) {
  std::mt19937_64 rng(19);
  const Vec a = random_vec(rng, 20), b = random_vec(rng, 20);
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  EXPECT_NEAR(cosine(a, b), ab / (std::sqrt(aa) * std::sqrt(bb)), 1e-12);
}

TEST(Stats, Examples) {
  const std::vector<double> a{1, 2, 3};
  const auto s = summary_stats(a);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_NEAR(s.std, std::sqrt(2.0 / 3.0), 1e-15);
  const std::vector<double> c{5, 5, 5, 5};
  const auto k = summary_stats(c);
  EXPECT_EQ(k.mean, 5.0);
  EXPECT_EQ(k.std, 0.0);
  EXPECT_EQ(k.median, 5.0);
  EXPECT_THROW(summary_stats(std::vector<double>{}), hs::InvalidArgument);
}

TEST(Stats, MatchesSortOracleAndIsOrderIndependent) {
  std::mt19937_64 rng(23);
  for (std::size_t n : {31u, 32u}) {
    auto v = random_values(rng, n, -5, 5);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const auto s = summary_stats(v);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(ss / static_cast<double>(n)), 1e-12);
    EXPECT_NEAR(s.median, median, 1e-12);
    for (int p = 0; p < 20; ++p) {
      std::shuffle(v.begin(), v.end(), rng);
      EXPECT_EQ(summary_stats(v).median, s.median);
    }
  }
}

TEST(TopK, Examples) {
  const std::vector<double> v{0.5, 2.0, 1.0};
  EXPECT_EQ(topk_sum(v, 1), 2.0);
  EXPECT_EQ(topk_sum(v, 3), 3.5);
  EXPECT_THROW(topk_sum(v, 0), hs::InvalidArgument);
  EXPECT_THROW(topk_sum(v, 4), hs::InvalidArgument);
}

TEST(TopK, MatchesSortOracleAndIsMonotone) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 100; ++t) {
    const auto v = random_values(rng, 10, 0.0, 3.0);
    auto s = v;
    std::sort(s.begin(), s.end(), std::greater<>());
    EXPECT_EQ(topk_sum(v, 3), s[0] + s[1] + s[2]);
    for (std::size_t k = 1; k < v.size(); ++k) EXPECT_LE(topk_sum(v, k), topk_sum(v, k + 1));
  }
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = a.below(7);
    EXPECT_EQ(k, b.below(7));
    EXPECT_LT(k, 7u);
    EXPECT_EQ(a.normal(), b.normal());
  }
  EXPECT_THROW(a.below(0), hs::InvalidArgument);
}

// The first outputs of mt19937_64 with the default seed are fixed by the standard.
TEST(Rng, EngineIsTheStandardOne) {
  Rng r(5489);
  for (int i = 1; i < 10000; ++i) r.next();
  EXPECT_EQ(r.next(), 9981545732273789042ULL);
}

TEST(Rng, MomentsAreSane) {
  Rng r(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) {
    su += r.uniform();
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    ++counts[r.below(5)];
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  // 5 sigma of a binomial(n, 1/5) count.
  for (int c : counts) EXPECT_NEAR(c, n / 5.0, 5 * std::sqrt(n * 0.2 * 0.8));
}
