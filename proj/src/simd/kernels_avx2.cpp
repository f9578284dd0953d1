// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached through the
// dispatcher after a CPU feature check.

#include <immintrin.h>

#include "kernels_internal.hpp"

namespace mixq::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_abs(const double* x, std::size_t n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(x[i]);
  return s;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t a_rs, std::size_t a_cs, const double* b, std::size_t ldb,
          double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + (i + 0) * a_rs;
    const double* a1 = a + (i + 1) * a_rs;
    const double* a2 = a + (i + 2) * a_rs;
    const double* a3 = a + (i + 3) * a_rs;
    double* c0 = c + (i + 0) * ldc;
    double* c1 = c + (i + 1) * ldc;
    double* c2 = c + (i + 2) * ldc;
    double* c3 = c + (i + 3) * ldc;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d r00 = _mm256_loadu_pd(c0 + j), r01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d r10 = _mm256_loadu_pd(c1 + j), r11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d r20 = _mm256_loadu_pd(c2 + j), r21 = _mm256_loadu_pd(c2 + j + 4);
      __m256d r30 = _mm256_loadu_pd(c3 + j), r31 = _mm256_loadu_pd(c3 + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * ldb + j;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        const std::size_t off = p * a_cs;
        __m256d x = _mm256_broadcast_sd(a0 + off);
        r00 = _mm256_fmadd_pd(x, b0, r00);
        r01 = _mm256_fmadd_pd(x, b1, r01);
        x = _mm256_broadcast_sd(a1 + off);
        r10 = _mm256_fmadd_pd(x, b0, r10);
        r11 = _mm256_fmadd_pd(x, b1, r11);
        x = _mm256_broadcast_sd(a2 + off);
        r20 = _mm256_fmadd_pd(x, b0, r20);
        r21 = _mm256_fmadd_pd(x, b1, r21);
        x = _mm256_broadcast_sd(a3 + off);
        r30 = _mm256_fmadd_pd(x, b0, r30);
        r31 = _mm256_fmadd_pd(x, b1, r31);
      }
      _mm256_storeu_pd(c0 + j, r00); _mm256_storeu_pd(c0 + j + 4, r01);
      _mm256_storeu_pd(c1 + j, r10); _mm256_storeu_pd(c1 + j + 4, r11);
      _mm256_storeu_pd(c2 + j, r20); _mm256_storeu_pd(c2 + j + 4, r21);
      _mm256_storeu_pd(c3 + j, r30); _mm256_storeu_pd(c3 + j + 4, r31);
    }
    for (; j < n; ++j) {
      double s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
      for (std::size_t p = 0; p < k; ++p) {
        const double bv = b[p * ldb + j];
        const std::size_t off = p * a_cs;
        s0 += a0[off] * bv;
        s1 += a1[off] * bv;
        s2 += a2[off] * bv;
        s3 += a3[off] * bv;
      }
      c0[j] = s0; c1[j] = s1; c2[j] = s2; c3[j] = s3;
    }
  }
  for (; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * a_rs + p * a_cs];
      axpy(aip, b + p * ldb, crow, n);
    }
  }
}

void uaq_codes(const double* w, std::size_t n, double delta, int32_t qmax,
               int32_t* codes) {
  const __m256d vd = _mm256_set1_pd(delta);
  const __m256d hi = _mm256_set1_pd(static_cast<double>(qmax));
  const __m256d lo = _mm256_set1_pd(-static_cast<double>(qmax));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d q = _mm256_round_pd(_mm256_div_pd(_mm256_loadu_pd(w + i), vd),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    q = _mm256_min_pd(_mm256_max_pd(q, lo), hi);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(codes + i), _mm256_cvtpd_epi32(q));
  }
  for (; i < n; ++i) codes[i] = detail::uaq_code(w[i], delta, qmax);
}

double uaq_sq_error(const double* w, std::size_t n, double delta, int32_t qmax) {
  const __m256d vd = _mm256_set1_pd(delta);
  const __m256d hi = _mm256_set1_pd(static_cast<double>(qmax));
  const __m256d lo = _mm256_set1_pd(-static_cast<double>(qmax));
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(w + i);
    __m256d q = _mm256_round_pd(_mm256_div_pd(x, vd),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    q = _mm256_min_pd(_mm256_max_pd(q, lo), hi);
    const __m256d d = _mm256_sub_pd(x, _mm256_mul_pd(vd, q));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = w[i] - delta * detail::uaq_code(w[i], delta, qmax);
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{"avx2", dot,  axpy,      sum_abs,
                                 sq_dist, gemm, uaq_codes, uaq_sq_error};
  return table;
}

}  // namespace mixq::simd
