#include <algorithm>
#include <cmath>

#include "mixq/core/errors.hpp"
#include "mixq/quant/quant.hpp"
#include "mixq/simd/kernels.hpp"

namespace mixq::quant {
namespace {

void check_bits(int n_q) {
  if (n_q < 2 || n_q > 16) throw UsageError("n_q must be in [2, 16], got " + std::to_string(n_q));
}

double row_lp_sum(std::span<const double> row, double delta, int qmax, double p) {
  const auto& k = simd::kernels();
  if (delta == 0.0) {
    // All-zero channel: codes are 0 and so is the error.
    return 0.0;
  }
  if (p == 2.0) return k.uaq_sq_error(row.data(), row.size(), delta, qmax);
  std::vector<std::int32_t> codes(row.size());
  k.uaq_codes(row.data(), row.size(), delta, qmax, codes.data());
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) s += std::pow(std::fabs(row[i] - delta * codes[i]), p);
  return s;
}

}  // namespace

int uaq_qmax(int n_q) {
  check_bits(n_q);
  return (1 << (n_q - 1)) - 1;
}

double uaq_scale(std::span<const double> row, int n_q, int alpha) {
  if (alpha < 0 || alpha >= 100) throw UsageError("alpha must be in [0, 100)");
  const int qmax = uaq_qmax(n_q);
  double m = 0.0;
  for (double v : row) m = std::max(m, std::fabs(v));
  if (m == 0.0) return 0.0;
  return m * (1.0 - 0.01 * alpha) / qmax;
}

std::vector<double> uaq_scales(const WeightTensor& w, int n_q, int alpha) {
  std::vector<double> out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] = uaq_scale(w.row(r), n_q, alpha);
  return out;
}

QuantizedTensor uaq_quantize(const WeightTensor& w, std::span<const double> scales, int n_q) {
  if (scales.size() != w.rows()) throw DataError("uaq_quantize: one scale per output channel required");
  const int qmax = uaq_qmax(n_q);
  QuantizedTensor q;
  q.method = QuantMethod::UAQ;
  q.n_q = n_q;
  q.rows = w.rows();
  q.cols = w.cols();
  q.codes.assign(w.size(), 0);
  q.scales.assign(scales.begin(), scales.end());
  const auto& k = simd::kernels();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double delta = scales[r];
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw DataError("uaq_quantize: invalid scale");
    if (delta == 0.0) continue;
    const auto row = w.row(r);
    k.uaq_codes(row.data(), row.size(), delta, qmax, q.codes.data() + r * w.cols());
  }
  return q;
}

AlphaSearch uaq_search_alpha(const WeightTensor& w, int n_q, double p_norm) {
  if (!(p_norm >= 1.0)) throw UsageError("p_norm must be >= 1");
  const int qmax = uaq_qmax(n_q);
  AlphaSearch best;
  double best_sum = 0.0;
  for (std::size_t g = 0; g < kAlphaGrid.size(); ++g) {
    const int alpha = kAlphaGrid[g];
    double sum = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const auto row = w.row(r);
      sum += row_lp_sum(row, uaq_scale(row, n_q, alpha), qmax, p_norm);
    }
    best.grid_losses[g] = std::pow(sum, 1.0 / p_norm);
    if (g == 0 || sum < best_sum) {
      best_sum = sum;
      best.alpha = alpha;
    }
  }
  best.loss = std::pow(best_sum, 1.0 / p_norm);
  return best;
}

}  // namespace mixq::quant
