#pragma once

// Central finite-difference check of the composite loss gradient.

#include <string>
#include <vector>

#include "mixq/surrogate/batch.hpp"
#include "mixq/surrogate/model.hpp"
#include "mixq/surrogate/params.hpp"
#include "mixq/surrogate/rank_losses.hpp"

namespace mixq::surrogate {

struct GradCheckSpec {
  double step = 1e-5;
  Mode mode = Mode::Train;
  bool use_rank = true;  // false: MSE term only
  RankLossKind rank_loss = RankLossKind::Hybrid;
  std::vector<int> active_hops;  // empty: every hop with designated nodes
  double tau = 1.0;
};

struct TensorGradError {
  std::string name;
  double max_abs_diff = 0.0;
  double max_abs_grad = 0.0;  // max over analytic and numeric entries
  // max_abs_diff / max(max_abs_grad, 1e-12); noisy for tensors whose true
  // gradient is zero (biases feeding a train-mode batch norm).
  double rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose +-step straddles a ranking or activation kink
};

struct GradCheckReport {
  std::vector<TensorGradError> tensors;
  // Infinity-norm error of the whole gradient vector relative to its scale:
  // max_t max_abs_diff / max_t max_abs_grad.
  double max_rel_error = 0.0;
  std::size_t skipped = 0;
};

// Compares the analytic gradient of the composite loss on (p, b, y_std)
// against central differences for every parameter entry. Entries where the
// ranking structure (sort order or isotonic blocks) or the sign pattern of
// any ReLU / LeakyReLU input differs between the probes are counted as
// skipped. Forward passes never touch running stats.
GradCheckReport grad_check(const SurrogateParams& p, const Batch& b, const std::vector<double>& y_std,
                           const GradCheckSpec& spec);

}  // namespace mixq::surrogate
