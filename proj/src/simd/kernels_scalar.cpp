#include "mixq/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace mixq::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_abs(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t a_rs, std::size_t a_cs, const double* b, std::size_t ldb,
          double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * a_rs + p * a_cs];
      if (aip == 0.0) continue;
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void uaq_codes(const double* w, std::size_t n, double delta, int32_t qmax,
               int32_t* codes) {
  for (std::size_t i = 0; i < n; ++i) codes[i] = detail::uaq_code(w[i], delta, qmax);
}

double uaq_sq_error(const double* w, std::size_t n, double delta, int32_t qmax) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = w[i] - delta * detail::uaq_code(w[i], delta, qmax);
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", dot,  axpy,      sum_abs,
                                 sq_dist,  gemm, uaq_codes, uaq_sq_error};
  return table;
}

}  // namespace mixq::simd
