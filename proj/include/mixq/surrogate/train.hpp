#pragma once

// Composite regression + ranking objective and the training loop.
//
//   L = MSE(y', y) + 1/|A| * sum_{m in A} L_rank(y, ||h_G^m||_1)
//
// with y standardized over the training corpus and A the active hops.

#include <cstdint>
#include <vector>

#include "mixq/surrogate/batch.hpp"
#include "mixq/surrogate/model.hpp"
#include "mixq/surrogate/params.hpp"
#include "mixq/surrogate/rank_losses.hpp"

namespace mixq::surrogate {

struct TrainSpec {
  int epochs = 10000;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  RankLossKind rank_loss = RankLossKind::Hybrid;
  std::vector<int> active_hops;  // empty: {0} plus the catalog hops
  double tau = 1.0;
  SurrogateDims dims;
  std::uint64_t seed = 0;
  // Off keeps the running BN statistics frozen during training.
  bool update_running_stats = true;
};

struct TargetScaler {
  double mean = 0.0;
  double std = 1.0;

  double to_std(double y) const { return (y - mean) / std; }
  double from_std(double z) const { return z * std + mean; }
};
TargetScaler fit_scaler(const std::vector<GraphSample>& samples);

struct CompositeLoss {
  double total = 0.0;
  double orig = 0.0;
  std::vector<double> rank;   // per entry of active_hops
  std::uint64_t signature = 0;
  bool rank_skipped = false;  // batch of one graph
};

// Loss of a forward pass plus the upstream gradients for backward().
CompositeLoss composite_loss(const ForwardCache& cache, const std::vector<double>& y_std,
                             const std::vector<int>& active_hops, RankLossKind kind, double tau,
                             std::vector<double>& dpred, std::vector<std::vector<double>>& dhop);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double orig = 0.0;
  std::vector<double> rank;  // per active hop
};

struct TrainResult {
  SurrogateParams params;
  TargetScaler scaler;
  std::vector<int> active_hops;
  std::vector<EpochLog> log;
  std::size_t skipped_rank_batches = 0;
};

// Deterministic in spec.seed. Throws NumericError on a non-finite loss.
TrainResult train(const std::vector<GraphSample>& corpus, const TrainSpec& spec);

struct Inference {
  std::vector<double> pred;                   // de-standardized
  std::vector<std::vector<double>> hop_norm;  // [hop][sample]
};

// Eval-mode pass over samples in batches.
Inference infer(const SurrogateParams& p, const TargetScaler& scaler, const std::vector<GraphSample>& samples,
                std::size_t batch_size = 128);

}  // namespace mixq::surrogate
