// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "headsteer/error.hpp"
#include "headsteer/numerics/kernels.hpp"

namespace headsteer::numerics {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(HEADSTEER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("HEADSTEER_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar::table();
#if defined(HEADSTEER_HAVE_AVX2)
    if (want == "avx2" && cpu_has_avx2()) return &avx2::table();
#endif
  }
#if defined(HEADSTEER_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2::table();
#endif
  return &scalar::table();
}

std::atomic<const KernelTable*>& active() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

bool simd_supported(SimdLevel level) noexcept {
  switch (level) {
    case SimdLevel::scalar:
      return true;
    case SimdLevel::avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& kernels_for(SimdLevel level) {
  if (!simd_supported(level)) throw InvalidArgument("SIMD level not supported on this build/CPU");
  switch (level) {
    case SimdLevel::scalar:
      return scalar::table();
    case SimdLevel::avx2:
#if defined(HEADSTEER_HAVE_AVX2)
      return avx2::table();
#else
      break;
#endif
  }
  return scalar::table();
}

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_acquire); }

void set_simd_level(SimdLevel level) {
  active().store(&kernels_for(level), std::memory_order_release);
}

SimdLevel parse_simd_level(std::string_view name) {
  if (name == "scalar") return SimdLevel::scalar;
  if (name == "avx2") return SimdLevel::avx2;
  throw InvalidArgument("unknown SIMD level '" + std::string(name) + "'");
}

}  // namespace headsteer::numerics
