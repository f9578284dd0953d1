#pragma once

// Dense arithmetic kernels used by the quantizers and the surrogate network.
//
// Every kernel has a scalar reference implementation. On x86-64 the library
// also carries AVX2+FMA and AVX-512F variants compiled in separate
// translation units; `kernels()` picks the widest one the running CPU
// supports. Set MIXQ_KERNELS=scalar|avx2|avx512 to force a variant.
//
// Variants agree with the scalar reference up to floating-point summation
// order, except `uaq_codes`, which is bit-exact across variants.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mixq::simd {

struct KernelTable {
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_abs)(const double* x, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);

  // C[m x n] += A[m x k] * B[k x n].
  // A is addressed as A[i * a_rs + p * a_cs] so a transposed operand needs no
  // copy; B and C are row-major with leading dimensions ldb and ldc.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k,
               const double* a, std::size_t a_rs, std::size_t a_cs,
               const double* b, std::size_t ldb,
               double* c, std::size_t ldc);

  // codes_i = clamp(round_half_even(w_i / delta), -qmax, qmax); delta > 0.
  void (*uaq_codes)(const double* w, std::size_t n, double delta, int32_t qmax,
                    int32_t* codes);
  // sum_i (w_i - delta * code_i)^2 with code_i as in uaq_codes.
  double (*uaq_sq_error)(const double* w, std::size_t n, double delta,
                         int32_t qmax);
};

const KernelTable& scalar_kernels();

// Runtime-selected table.
const KernelTable& kernels();

// All variants compiled in and supported by this CPU, scalar first.
std::vector<const KernelTable*> available_kernels();

}  // namespace mixq::simd
