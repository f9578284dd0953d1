#pragma once

// Quantization configurations and graphs annotated with their per-node
// quantization features.

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mixq/graph/net_graph.hpp"
#include "mixq/quant/quant.hpp"

namespace mixq::graph {

struct QuantChoice {
  quant::QuantMethod method = quant::QuantMethod::KMeansC;
  int bits = 4;

  // Position in the canonical 6-way order (3,C) (3,A) (3,U) (4,C) (4,A) (4,U),
  // which is also the tie-break order: fewer bits first, then C < A < U.
  int index() const;
  static QuantChoice from_index(int i);
  friend bool operator==(const QuantChoice&, const QuantChoice&) = default;
};

inline constexpr int kNumChoices = 6;

// One choice per weight node, indexed by the graph's weight slot.
struct QuantConfig {
  std::vector<QuantChoice> choices;

  static QuantConfig uniform(const NetGraph& g, QuantChoice c);
  // Compact key "0351..." of choice indices, used for deduplication.
  std::string key() const;
  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

// Converts between slot order and the node-id keyed form. Throws DataError
// listing every missing or unknown node id.
QuantConfig config_from_map(const NetGraph& g, const std::map<std::string, QuantChoice>& m);
std::map<std::string, QuantChoice> config_to_map(const NetGraph& g, const QuantConfig& c);

struct NodeFeatures {
  // Categorical codes. 0 is reserved for passthrough nodes in method/bits.
  int method = 0;  // 1 + QuantMethod
  int bits = 0;    // 1 for 3-bit, 2 for 4-bit
  int op_type = 0;
  int block = 0;
  // Scalars, zero for passthrough nodes.
  double epsilon = 0.0;
  double size_ratio = 0.0;
};

inline constexpr int kMethodCategories = 4;
inline constexpr int kBitCategories = 3;

// Per-layer results of every (method, bits) choice, computed once per model.
class QuantTable {
 public:
  QuantTable() = default;
  // weights[slot] must match the weight node's [out_dim, in_dim] shape.
  QuantTable(const NetGraph& g, const std::vector<quant::WeightTensor>& weights, double p_norm = 2.0,
             const quant::KMeansOptions& kopts = {});

  const quant::QuantOutcome& outcome(std::size_t slot, int choice) const { return table_.at(slot)[choice]; }
  std::size_t element_count(std::size_t slot) const { return sizes_.at(slot); }
  std::size_t slots() const { return table_.size(); }

 private:
  std::vector<std::array<quant::QuantOutcome, kNumChoices>> table_;
  std::vector<std::size_t> sizes_;
};

struct AnnotatedGraph {
  std::shared_ptr<const NetGraph> graph;
  QuantConfig config;
  std::vector<NodeFeatures> features;  // per node
  std::vector<std::uint64_t> bit_cost; // per weight slot
  std::vector<std::size_t> elements;   // per weight slot
};

// Features of a passthrough node, or of a weight node without quantization
// scalars (used to build feature vectors for arbitrary choices).
NodeFeatures base_features(const NetGraph& g, std::size_t node);
NodeFeatures weight_features(const NetGraph& g, std::size_t node, QuantChoice c, double epsilon,
                             double size_ratio);

AnnotatedGraph apply_config(std::shared_ptr<const NetGraph> g, const QuantConfig& config, const QuantTable& table);
// Convenience path that quantizes directly.
AnnotatedGraph apply_config(std::shared_ptr<const NetGraph> g, const QuantConfig& config,
                            const std::vector<quant::WeightTensor>& weights, double p_norm = 2.0);

// Size-weighted mean precision: sum(size * n_q) / sum(size), or with FP
// overhead sum(bit_cost) / sum(size).
double average_bits(const AnnotatedGraph& ag, bool include_overhead);
// Overhead-free value straight from a config.
double average_bits(const NetGraph& g, const QuantConfig& config);

}  // namespace mixq::graph
