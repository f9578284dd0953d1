#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mixq/simd/kernels.hpp"

namespace mixq::simd {

#if defined(MIXQ_HAVE_X86_VARIANTS)
const KernelTable& avx2_kernels();
const KernelTable& avx512_kernels();
#endif

namespace detail {
namespace {

// Scalar tail shared by every variant so that codes stay bit-identical.
// Internal linkage: each variant TU gets a copy built with its own flags.
// std::nearbyint under the default FE_TONEAREST mode rounds half to even.
inline int32_t uaq_code(double w, double delta, int32_t qmax) {
  const double q = std::nearbyint(w / delta);
  const double lim = static_cast<double>(qmax);
  return static_cast<int32_t>(std::clamp(q, -lim, lim));
}

}  // namespace
}  // namespace detail
}  // namespace mixq::simd
