#pragma once

// Parameters of the graph regressor.
//
// Node input: embeddings of (method, bits, op type, block index) plus a
// linear projection of (epsilon, size ratio), concatenated and fused by
// affine -> batch norm -> ReLU into h^0. Then M attention message-passing
// layers, each h^l = h^{l-1} + ReLU(BN(GAT(h^{l-1}))), and a regression head
// of four affine maps with a ReLU after the second, applied to the mean of
// h^M over all nodes.

#include <cstdint>
#include <string>
#include <vector>

namespace mixq::surrogate {

struct SurrogateDims {
  int hidden = 64;
  int layers = 4;
  int method_dim = 8;
  int bits_dim = 4;
  int op_dim = 16;
  int block_dim = 8;
  int scalar_dim = 8;
  int head_mid = 32;
  int block_vocab = 16;  // block indices beyond this are clamped

  int input_dim() const { return method_dim + bits_dim + op_dim + block_dim + scalar_dim; }
  friend bool operator==(const SurrogateDims&, const SurrogateDims&) = default;
};

struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
};

// Parameter slots. Per-layer and head tensors follow the fixed ones.
namespace slot {
inline constexpr std::size_t kEmbMethod = 0, kEmbBits = 1, kEmbOp = 2, kEmbBlock = 3, kScalarW = 4,
                             kScalarB = 5, kFuseW = 6, kFuseB = 7, kBn0Gamma = 8, kBn0Beta = 9, kFixed = 10;
inline constexpr std::size_t kPerLayer = 8;
// Offsets inside a message-passing layer.
inline constexpr std::size_t kWs = 0, kBs = 1, kWt = 2, kBt = 3, kAtt = 4, kBias = 5, kBnGamma = 6, kBnBeta = 7;
inline constexpr std::size_t layer(std::size_t l, std::size_t off) { return kFixed + l * kPerLayer + off; }
inline constexpr std::size_t head(int layers, std::size_t k) {
  return kFixed + static_cast<std::size_t>(layers) * kPerLayer + k;
}
}  // namespace slot

struct SurrogateParams {
  SurrogateDims dims;
  std::vector<Tensor> tensors;
  // Batch-norm running statistics: [2*b] mean, [2*b+1] variance for BN b
  // (b = 0 is the input fusion, b = l+1 follows layer l).
  std::vector<Tensor> buffers;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// Weights and biases uniform in +-1/sqrt(fan_in); embeddings uniform in
// +-1; BN gamma 1, beta 0; running mean 0, variance 1.
SurrogateParams init_params(const SurrogateDims& dims, int op_vocab, std::uint64_t seed);

// Zero-filled tensors with the same shapes (gradient accumulators).
std::vector<Tensor> zeros_like(const std::vector<Tensor>& t);

}  // namespace mixq::surrogate
