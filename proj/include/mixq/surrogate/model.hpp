#pragma once

// Forward pass and hand-written reverse pass of the graph regressor.
//
// Message passing (single-head GATv2 style) for node i over its incoming
// neighbours j plus a self-loop:
//   xs = h W_s + b_s,  xt = h W_t + b_t
//   e_ij = a . LeakyReLU_0.2(xs_j + xt_i),  alpha = softmax_j(e_ij)
//   g_i = sum_j alpha_ij xs_j + bias
//   h'_i = h_i + ReLU(BN(g)_i)
// Hop-level graph embedding h_G^m is the mean of h^m over the hop's
// designated nodes; its L1 norm is the hop score.

#include <vector>

#include "mixq/surrogate/batch.hpp"
#include "mixq/surrogate/params.hpp"

namespace mixq::surrogate {

enum class Mode { Train, Eval };

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kLeakySlope = 0.2;

struct BnCache {
  std::vector<double> xhat;    // N x C
  std::vector<double> out;     // N x C, before the ReLU
  std::vector<double> invstd;  // C
  std::vector<double> mean;    // C, batch statistics (train mode)
  std::vector<double> var;     // C, biased batch variance (train mode)
  std::size_t rows = 0;
};

struct LayerCache {
  std::vector<double> xs, xt;  // N x H
  std::vector<double> u;       // E x H, pre-activation of the attention scorer
  std::vector<double> alpha;   // E
  BnCache bn;
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  int layers_run = 0;
  std::vector<double> x0;  // N x input_dim
  BnCache bn0;
  std::vector<std::vector<double>> h;  // h[m], m = 0..layers_run, N x H
  std::vector<LayerCache> layer;
  // Head (only when the full stack ran).
  std::vector<double> readout, a1, a2, a3;  // B x H, B x H, B x H, B x mid
  std::vector<std::vector<double>> hop_mean;  // per hop, B x H (empty if inactive)

  std::vector<double> pred;                   // B
  std::vector<std::vector<double>> hop_norm;  // per hop, B (empty if inactive)
};

// Runs the network. max_layer < 0 runs every layer and the head; otherwise
// the pass stops after layer max_layer (h^max_layer), without a prediction.
void forward(const SurrogateParams& p, const Batch& b, Mode mode, ForwardCache& cache, int max_layer = -1);

// Accumulates gradients of  sum_g dpred[g] * pred[g]
// + sum_m sum_g dhop[m][g] * hop_norm[m][g]  into grads (same layout as
// p.tensors). dhop[m] may be empty for hops without a loss term. Requires
// a full forward pass.
void backward(const SurrogateParams& p, const Batch& b, const ForwardCache& cache, const std::vector<double>& dpred,
              const std::vector<std::vector<double>>& dhop, std::vector<Tensor>& grads);

// Moves BN running statistics toward the batch statistics of a train-mode
// pass: r = (1 - momentum) r + momentum * stat, variance unbiased.
void update_running_stats(SurrogateParams& p, const ForwardCache& cache);

// L1 norm of node v's (global batch index) embedding at hop m.
double node_norm(const ForwardCache& cache, std::size_t node, int m, int hidden);

}  // namespace mixq::surrogate
