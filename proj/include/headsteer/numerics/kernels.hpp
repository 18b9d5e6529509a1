// SPDX-License-Identifier: Apache-2.0
#pragma once

// Inner-loop kernels with a scalar reference implementation and SIMD
// variants chosen once at runtime.
//
// Elementwise kernels (axpy, scale, row_times_matrix) are bit-identical across variants: the
// SIMD versions issue the same multiply and add per lane, never fused.
// Reductions (dot, squared_distance, max) reassociate the sum across lanes and
// agree with the scalar reference to rounding.

#include <cstddef>
#include <string_view>

namespace headsteer::numerics {

enum class SimdLevel { scalar, avx2 };

struct KernelTable {
  SimdLevel level;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// y[i] += a * x[i]
  void (*axpy)(double* y, double a, const double* x, std::size_t n);
  /// x[i] *= s
  void (*scale)(double* x, double s, std::size_t n);
  /// y[j] += x[p] * w[p*m + j] for p = 0..k-1 in order; the per-element
  /// operation sequence of k axpy calls, so elementwise-exact like axpy.
  void (*row_times_matrix)(double* y, const double* x, const double* w, std::size_t k,
                           std::size_t m);
  double (*max_value)(const double* x, std::size_t n);
};

namespace scalar {
const KernelTable& table() noexcept;
}

#if defined(HEADSTEER_HAVE_AVX2)
namespace avx2 {
const KernelTable& table() noexcept;
}
#endif

/// True when the variant was compiled in and the CPU supports it.
bool simd_supported(SimdLevel level) noexcept;

/// Kernel table for an explicit level; throws InvalidArgument if unsupported.
const KernelTable& kernels_for(SimdLevel level);

/// Active table. Defaults to the best supported level; the environment
/// variable HEADSTEER_SIMD=scalar|avx2 overrides the initial choice.
const KernelTable& kernels() noexcept;

/// Switch the active table. Intended for process start-up and tests; callers
/// must not race this against running computations.
void set_simd_level(SimdLevel level);

SimdLevel parse_simd_level(std::string_view name);

}  // namespace headsteer::numerics
