// SPDX-License-Identifier: Apache-2.0
//
// Compiled with -mavx2 (no -mfma). Only reached after a runtime CPU check.

#ifndef __AVX2__
#error "kernels_avx2.cpp must be compiled with AVX2 enabled"
#endif

#include <immintrin.h>

#include "headsteer/numerics/kernels.hpp"

namespace headsteer::numerics::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  const __m128d h = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, h));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double out = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    out += d * d;
  }
  return out;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double* x, double s, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vs));
  }
  for (; i < n; ++i) x[i] *= s;
}

void row_times_matrix(double* y, const double* x, const double* w, std::size_t k,
                      std::size_t m) {
  std::size_t j = 0;
  // Four accumulators held in registers across the whole k loop.
  for (; j + 16 <= m; j += 16) {
    __m256d a0 = _mm256_loadu_pd(y + j);
    __m256d a1 = _mm256_loadu_pd(y + j + 4);
    __m256d a2 = _mm256_loadu_pd(y + j + 8);
    __m256d a3 = _mm256_loadu_pd(y + j + 12);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d xp = _mm256_set1_pd(x[p]);
      const double* wr = w + p * m + j;
      a0 = _mm256_add_pd(a0, _mm256_mul_pd(xp, _mm256_loadu_pd(wr)));
      a1 = _mm256_add_pd(a1, _mm256_mul_pd(xp, _mm256_loadu_pd(wr + 4)));
      a2 = _mm256_add_pd(a2, _mm256_mul_pd(xp, _mm256_loadu_pd(wr + 8)));
      a3 = _mm256_add_pd(a3, _mm256_mul_pd(xp, _mm256_loadu_pd(wr + 12)));
    }
    _mm256_storeu_pd(y + j, a0);
    _mm256_storeu_pd(y + j + 4, a1);
    _mm256_storeu_pd(y + j + 8, a2);
    _mm256_storeu_pd(y + j + 12, a3);
  }
  for (; j + 4 <= m; j += 4) {
    __m256d a = _mm256_loadu_pd(y + j);
    for (std::size_t p = 0; p < k; ++p) {
      a = _mm256_add_pd(a, _mm256_mul_pd(_mm256_set1_pd(x[p]), _mm256_loadu_pd(w + p * m + j)));
    }
    _mm256_storeu_pd(y + j, a);
  }
  for (; j < m; ++j) {
    double a = y[j];
    for (std::size_t p = 0; p < k; ++p) a += x[p] * w[p * m + j];
    y[j] = a;
  }
}

double max_value(const double* x, std::size_t n) {
  if (n < 4) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
  }
  __m256d vm = _mm256_loadu_pd(x);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, vm);
  double m = lanes[0];
  for (int l = 1; l < 4; ++l) m = lanes[l] > m ? lanes[l] : m;
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

constexpr KernelTable kTable{SimdLevel::avx2, "avx2", &dot, &squared_distance,
                             &axpy, &scale, &row_times_matrix, &max_value};

}  // namespace

const KernelTable& table() noexcept { return kTable; }

}  // namespace headsteer::numerics::avx2
