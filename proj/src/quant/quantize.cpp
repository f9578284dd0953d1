#include <cmath>

#include "mixq/core/errors.hpp"
#include "mixq/quant/quant.hpp"
#include "mixq/simd/kernels.hpp"

namespace mixq::quant {

std::string_view to_string(QuantMethod m) {
  switch (m) {
    case QuantMethod::KMeansC: return "kmeans_c";
    case QuantMethod::KMeansA: return "kmeans_a";
    case QuantMethod::UAQ: return "uaq";
  }
  return "?";
}

QuantMethod parse_method(std::string_view s) {
  if (s == "kmeans_c") return QuantMethod::KMeansC;
  if (s == "kmeans_a") return QuantMethod::KMeansA;
  if (s == "uaq") return QuantMethod::UAQ;
  if (s == "uaq_asym") throw UsageError("asymmetric UAQ (zero-point) is not supported");
  throw UsageError("unknown quantization method '" + std::string(s) + "'");
}

WeightTensor::WeightTensor(std::vector<double> values, std::size_t rows, std::size_t cols, int n_fp,
                           std::string layer_id)
    : values_(std::move(values)), rows_(rows), cols_(cols), n_fp_(n_fp), layer_id_(std::move(layer_id)) {
  if (rows_ == 0 || cols_ == 0) throw DataError("weight tensor '" + layer_id_ + "' has an empty dimension");
  if (values_.size() != rows_ * cols_) throw DataError("weight tensor '" + layer_id_ + "': size != rows*cols");
  if (n_fp_ < 1 || n_fp_ > 64) throw DataError("weight tensor: n_fp out of range");
  for (double v : values_)
    if (!std::isfinite(v)) throw DataError("weight tensor '" + layer_id_ + "' has non-finite values");
}

void QuantizedTensor::validate() const {
  if (rows == 0 || cols == 0) throw DataError("quantized tensor: empty shape");
  if (codes.size() != rows * cols) throw DataError("quantized tensor: code count mismatch");
  if (n_q < 1 || n_q > 16) throw DataError("quantized tensor: n_q out of range");
  if (method == QuantMethod::UAQ) {
    if (scales.size() != rows) throw DataError("quantized tensor: one scale per channel required");
    const std::int32_t qmax = (1 << (n_q - 1)) - 1;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!(scales[r] >= 0.0) || !std::isfinite(scales[r])) throw DataError("quantized tensor: bad scale");
      for (std::size_t c = 0; c < cols; ++c) {
        const auto v = codes[r * cols + c];
        if (v < -qmax || v > qmax) throw DataError("quantized tensor: UAQ code out of range");
        if (scales[r] == 0.0 && v != 0) throw DataError("quantized tensor: nonzero code in zero channel");
      }
    }
    return;
  }
  const std::size_t want = method == QuantMethod::KMeansC ? rows : 1;
  if (codebooks.size() != want) throw DataError("quantized tensor: wrong codebook count");
  const std::size_t k = std::size_t{1} << n_q;
  for (const auto& cb : codebooks)
    if (cb.size() != k) throw DataError("quantized tensor: codebook must have 2^n_q entries");
  for (auto v : codes)
    if (v < 0 || static_cast<std::size_t>(v) >= k) throw DataError("quantized tensor: index outside codebook");
}

std::vector<double> dequantize(const QuantizedTensor& q) {
  q.validate();
  std::vector<double> out(q.size());
  for (std::size_t r = 0; r < q.rows; ++r) {
    for (std::size_t c = 0; c < q.cols; ++c) {
      const std::size_t i = r * q.cols + c;
      switch (q.method) {
        case QuantMethod::UAQ: out[i] = q.scales[r] * q.codes[i]; break;
        case QuantMethod::KMeansC: out[i] = q.codebooks[r][q.codes[i]]; break;
        case QuantMethod::KMeansA: out[i] = q.codebooks[0][q.codes[i]]; break;
      }
    }
  }
  return out;
}

double quant_error(std::span<const double> w_fp, std::span<const double> w_dq, double p_norm) {
  if (w_fp.size() != w_dq.size()) throw DataError("quant_error: shape mismatch");
  if (!(p_norm >= 1.0)) throw UsageError("quant_error: p_norm must be >= 1");
  if (p_norm == 2.0) return std::sqrt(simd::kernels().sq_dist(w_fp.data(), w_dq.data(), w_fp.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < w_fp.size(); ++i) s += std::pow(std::fabs(w_fp[i] - w_dq[i]), p_norm);
  return std::pow(s, 1.0 / p_norm);
}

std::uint64_t bit_cost(const QuantizedTensor& q, int n_fp) {
  const std::uint64_t payload = static_cast<std::uint64_t>(q.size()) * static_cast<std::uint64_t>(q.n_q);
  const auto fp = static_cast<std::uint64_t>(n_fp);
  switch (q.method) {
    case QuantMethod::KMeansC:
      return payload + fp * (std::uint64_t{1} << q.n_q) * static_cast<std::uint64_t>(q.rows);
    case QuantMethod::KMeansA:
      return payload + fp * (std::uint64_t{1} << q.n_q);
    case QuantMethod::UAQ:
      // Symmetric: one scale per channel, no zero-point.
      return payload + fp * static_cast<std::uint64_t>(q.rows);
  }
  return payload;
}

QuantizedTensor quantize(const WeightTensor& w, QuantMethod method, int n_q, double p_norm,
                         const KMeansOptions& kopts) {
  switch (method) {
    case QuantMethod::KMeansC: return kmeans_quantize(w, n_q, KMeansMode::PerChannel, kopts);
    case QuantMethod::KMeansA: return kmeans_quantize(w, n_q, KMeansMode::WholeTensor, kopts);
    case QuantMethod::UAQ: {
      const auto search = uaq_search_alpha(w, n_q, p_norm);
      return uaq_quantize(w, uaq_scales(w, n_q, search.alpha), n_q);
    }
  }
  throw UsageError("unknown method");
}

QuantOutcome quantize_and_measure(const WeightTensor& w, QuantMethod method, int n_q, double p_norm,
                                  const KMeansOptions& kopts) {
  const auto q = quantize(w, method, n_q, p_norm, kopts);
  QuantOutcome out;
  out.dq = dequantize(q);
  out.epsilon = quant_error(w.values(), out.dq, p_norm);
  out.bit_cost = bit_cost(q, w.n_fp());
  out.size_ratio = static_cast<double>(out.bit_cost) /
                   (static_cast<double>(w.size()) * static_cast<double>(w.n_fp()));
  return out;
}

}  // namespace mixq::quant
