#pragma once

// Graph samples and their packing into a single disconnected batch graph.

#include <memory>
#include <vector>

#include "mixq/graph/annotate.hpp"
#include "mixq/graph/families.hpp"

namespace mixq::surrogate {

// Designated node sets per hop level m = 0..M. Hop 0 holds every weight
// node; hop m > 0 the roots of catalog subgraphs with hop m. The readout
// always uses all nodes at hop M and is separate from these sets.
struct HopSets {
  std::vector<std::vector<std::size_t>> designated;

  bool active(int m) const { return m >= 0 && static_cast<std::size_t>(m) < designated.size() && !designated[m].empty(); }
};

HopSets make_hop_sets(const graph::NetGraph& g, const std::vector<graph::SubgraphSpec>& catalog, int layers);

// {0} plus every hop used by the catalog (limited to [0, layers]).
std::vector<int> default_active_hops(const std::vector<graph::SubgraphSpec>& catalog, int layers);

struct GraphSample {
  std::shared_ptr<const graph::NetGraph> graph;
  std::shared_ptr<const HopSets> hops;
  std::vector<graph::NodeFeatures> features;
  double y = 0.0;
};

GraphSample make_sample(const graph::AnnotatedGraph& ag, std::shared_ptr<const HopSets> hops, double y);

struct Batch {
  std::size_t graphs = 0;
  std::size_t nodes = 0;
  std::vector<int> method, bits, op, block;
  std::vector<double> scalars;  // nodes x 2
  std::vector<std::size_t> node_ptr;  // graphs + 1
  // Incoming edges grouped by target, self-loop first.
  std::vector<std::size_t> in_ptr;  // nodes + 1
  std::vector<std::size_t> in_src;
  std::vector<std::size_t> graph_of;  // per node
  // Per hop: CSR over graphs of designated global node indices.
  std::vector<std::vector<std::size_t>> hop_ptr, hop_nodes;
  std::vector<double> y;

  std::size_t edges() const { return in_src.size(); }
};

// Packs samples[idx[0]], samples[idx[1]], ... into one batch. All samples
// must have hop sets with the same number of levels.
Batch make_batch(const std::vector<GraphSample>& samples, const std::vector<std::size_t>& idx);
Batch make_batch(const std::vector<GraphSample>& samples);

}  // namespace mixq::surrogate
