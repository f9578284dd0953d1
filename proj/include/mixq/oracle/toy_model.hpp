#pragma once

// Desk-scale stand-in for a denoiser: a graph from one of the toy families
// with concrete weights and a frozen synthetic regression task. The oracle
// loss of a quantization configuration is the eval-set MSE after
// substituting every layer's dequantized weights.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mixq/graph/annotate.hpp"
#include "mixq/graph/families.hpp"

namespace mixq::oracle {

struct ToyModelOptions {
  std::size_t tokens = 8;
  std::size_t caption_tokens = 4;
  std::size_t eval_samples = 32;
  std::size_t fit_samples = 64;
  // Label noise relative to the RMS of the full-precision output.
  double label_noise = 0.1;
  double ridge = 1e-3;
  double p_norm = 2.0;
};

struct PlantSpec {
  std::string node_id;
  double gain = 10.0;
};

// One sample of the synthetic task.
struct TaskSample {
  std::vector<double> x;  // tokens x width
  std::vector<double> t;  // 1 x width
  std::vector<double> c;  // caption_tokens x width
  std::vector<double> y;  // tokens x output width
};

class ToyModel {
 public:
  std::shared_ptr<const graph::NetGraph> graph;
  std::vector<graph::SubgraphSpec> catalog;
  graph::FamilyParams params;
  std::uint64_t seed = 0;
  ToyModelOptions options;
  std::vector<quant::WeightTensor> weights;  // by weight slot
  graph::QuantTable table;
  std::vector<TaskSample> eval_set;
  double baseline_loss = 0.0;
  // Planted layer (weight slot) and its error gain; gain 1 is neutral.
  std::optional<std::size_t> planted_slot;
  double planted_gain = 1.0;

  // Eval-set MSE with the given per-slot weights (each [out_dim, in_dim]).
  double loss_with(const std::vector<const std::vector<double>*>& slot_weights) const;
  // Loss with the configuration's dequantized weights (planting applied).
  double config_loss(const graph::QuantConfig& config) const;
  double full_precision_loss() const;
  std::size_t output_node() const { return output_; }

  friend ToyModel build_toy_model(std::string_view, const graph::FamilyParams&, std::uint64_t,
                                  const ToyModelOptions&);

 private:
  std::size_t output_ = 0;
};

// Builds the family graph, draws heavy-tailed weights with per-channel scale
// spread, generates the frozen task (full-precision output plus label noise)
// and refits the output layer by ridge regression on a separate fit set.
ToyModel build_toy_model(std::string_view family, const graph::FamilyParams& params, std::uint64_t seed,
                         const ToyModelOptions& options = {});

// Copy of the model whose planted layer injects gain times its
// reconstruction error: W_eff = W + gain * (W_dq - W).
ToyModel plant_sensitivity(const ToyModel& model, const PlantSpec& plant);

}  // namespace mixq::oracle
