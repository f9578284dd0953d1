#pragma once

// Weight-only quantization: symmetric uniform affine quantization (UAQ) with a
// grid-searched shrink factor, K-Means codebook quantization per output
// channel or over the whole tensor, dequantization, reconstruction error and
// exact storage accounting.
//
// All arithmetic is done in double regardless of the source precision; n_fp
// only enters the bit accounting.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mixq::quant {

enum class QuantMethod : std::uint8_t { KMeansC = 0, KMeansA = 1, UAQ = 2 };

inline constexpr std::array<QuantMethod, 3> kMethods{QuantMethod::KMeansC, QuantMethod::KMeansA,
                                                     QuantMethod::UAQ};
inline constexpr std::array<int, 2> kBitChoices{3, 4};
inline constexpr std::array<int, 10> kAlphaGrid{0, 10, 20, 30, 40, 50, 60, 70, 80, 90};

std::string_view to_string(QuantMethod m);
// Accepts "kmeans_c", "kmeans_a", "uaq". Asymmetric UAQ is not supported and
// is rejected with a UsageError.
QuantMethod parse_method(std::string_view s);

// Row-major [c_out, fan_in] view of a layer's weights.
class WeightTensor {
 public:
  WeightTensor() = default;
  WeightTensor(std::vector<double> values, std::size_t rows, std::size_t cols, int n_fp = 16,
               std::string layer_id = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  int n_fp() const { return n_fp_; }
  const std::string& layer_id() const { return layer_id_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }

 private:
  std::vector<double> values_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  int n_fp_ = 16;
  std::string layer_id_;
};

struct QuantizedTensor {
  QuantMethod method = QuantMethod::UAQ;
  int n_q = 4;
  std::size_t rows = 0;
  std::size_t cols = 0;
  // K-Means: codebook indices. UAQ: signed integer codes. Row-major.
  std::vector<std::int32_t> codes;
  // K-Means only: one codebook per row (KMeansC) or a single one (KMeansA),
  // each with exactly 2^n_q entries.
  std::vector<std::vector<double>> codebooks;
  // UAQ only: Delta per output channel; 0 marks an all-zero channel.
  std::vector<double> scales;

  std::size_t size() const { return rows * cols; }
  // Throws DataError if any invariant is violated.
  void validate() const;
};

struct QuantOutcome {
  std::vector<double> dq;
  double epsilon = 0.0;
  std::uint64_t bit_cost = 0;
  double size_ratio = 0.0;
};

// --- UAQ -------------------------------------------------------------------

int uaq_qmax(int n_q);  // 2^(n_q-1) - 1

// Delta_alpha = max|w| * (1 - 0.01 alpha) / (2^(n_q-1) - 1); 0 for an all-zero row.
double uaq_scale(std::span<const double> row, int n_q, int alpha);
std::vector<double> uaq_scales(const WeightTensor& w, int n_q, int alpha);
QuantizedTensor uaq_quantize(const WeightTensor& w, std::span<const double> scales, int n_q);

struct AlphaSearch {
  int alpha = 0;
  double loss = 0.0;  // ||W - W_DQ||_p at the chosen alpha
  std::array<double, kAlphaGrid.size()> grid_losses{};
};

// Grid search over kAlphaGrid minimizing the entrywise L_p reconstruction
// error of the whole layer; ties go to the smaller alpha.
AlphaSearch uaq_search_alpha(const WeightTensor& w, int n_q, double p_norm = 2.0);

// --- K-Means ---------------------------------------------------------------

enum class KMeansMode { PerChannel, WholeTensor };
enum class KMeansSolver { Exact, Lloyd };

struct KMeansOptions {
  KMeansSolver solver = KMeansSolver::Exact;
  int restarts = 3;
  int max_iter = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

struct Clustering1D {
  std::vector<double> centroids;          // exactly k entries, ascending
  std::vector<std::int32_t> assignment;   // per input value
  double sse = 0.0;
};

// Globally optimal 1-D k-means by dynamic programming over sorted values.
Clustering1D kmeans_1d_exact(std::span<const double> x, int k);
// Lloyd iterations from k-means++ seeds, best of opts.restarts runs.
Clustering1D kmeans_1d_lloyd(std::span<const double> x, int k, const KMeansOptions& opts);

QuantizedTensor kmeans_quantize(const WeightTensor& w, int n_q, KMeansMode mode,
                                const KMeansOptions& opts = {});

// --- Shared ----------------------------------------------------------------

std::vector<double> dequantize(const QuantizedTensor& q);
// Entrywise p-norm of the difference over the flattened tensors.
double quant_error(std::span<const double> w_fp, std::span<const double> w_dq, double p_norm = 2.0);
std::uint64_t bit_cost(const QuantizedTensor& q, int n_fp);

// Quantizes with the given method; UAQ runs the alpha search under p_norm.
QuantizedTensor quantize(const WeightTensor& w, QuantMethod method, int n_q, double p_norm = 2.0,
                         const KMeansOptions& kopts = {});
QuantOutcome quantize_and_measure(const WeightTensor& w, QuantMethod method, int n_q,
                                  double p_norm = 2.0, const KMeansOptions& kopts = {});

}  // namespace mixq::quant
