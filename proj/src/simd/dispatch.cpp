#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "mixq/simd/kernels.hpp"

namespace mixq::simd {
namespace {

#if defined(MIXQ_HAVE_X86_VARIANTS)
bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
bool cpu_has_avx512() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx512f");
}
#endif

const KernelTable& select() {
  const char* forced = std::getenv("MIXQ_KERNELS");
  const std::string want = forced ? forced : "auto";
  if (want == "scalar") return scalar_kernels();
#if defined(MIXQ_HAVE_X86_VARIANTS)
  if (want == "avx2" && cpu_has_avx2()) return avx2_kernels();
  if ((want == "avx512" || want == "auto") && cpu_has_avx512()) return avx512_kernels();
  if (cpu_has_avx2()) return avx2_kernels();
#endif
  return scalar_kernels();
}

}  // namespace

const KernelTable& kernels() {
  static const KernelTable& table = select();
  return table;
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
#if defined(MIXQ_HAVE_X86_VARIANTS)
  if (cpu_has_avx2()) out.push_back(&avx2_kernels());
  if (cpu_has_avx512()) out.push_back(&avx512_kernels());
#endif
  return out;
}

}  // namespace mixq::simd
