#pragma once

// Small random graphs with random node features, for surrogate tests.

#include <memory>
#include <string>
#include <vector>

#include "mixq/core/rng.hpp"
#include "mixq/graph/annotate.hpp"
#include "mixq/graph/families.hpp"
#include "mixq/surrogate/batch.hpp"

namespace mixq::testing {

struct RandomGraph {
  std::shared_ptr<const graph::NetGraph> graph;
  std::vector<graph::SubgraphSpec> catalog;  // roots only, members not filled
};

// A DAG of n nodes: node 0 is an input, every other node draws one or two
// predecessors among earlier nodes and is a weight layer with probability 0.6.
// Hop roots for levels 1..layers are picked at random among later nodes.
inline RandomGraph random_graph(std::size_t n, int layers, CounterRng& rng) {
  const auto& vocab = graph::op_type_vocabulary();
  auto g = std::make_shared<graph::NetGraph>("random");
  graph::OpNode in;
  in.id = "n0";
  in.compute = graph::Compute::Input;
  in.op_type = "input";
  in.out_dim = 4;
  g->add_node(in);
  std::size_t weights = 0;
  for (std::size_t i = 1; i < n; ++i) {
    graph::OpNode v;
    v.id = "n" + std::to_string(i);
    v.out_dim = 4;
    v.block_index = static_cast<int>(rng.below(4));
    v.op_type = vocab[1 + rng.below(vocab.size() - 1)];
    // Keep at least one weight node.
    if (rng.uniform() < 0.6 || (i + 1 == n && weights == 0)) {
      v.kind = graph::NodeKind::Weight;
      v.compute = graph::Compute::Linear;
      v.weight_ref = v.id;
      ++weights;
    } else {
      v.compute = graph::Compute::Add;
    }
    g->add_node(v);
    const std::size_t a = rng.below(i);
    g->add_edge(a, i);
    if (i > 1 && rng.uniform() < 0.5) {
      const std::size_t b = rng.below(i);
      if (b != a) g->add_edge(b, i);
    }
  }
  g->finalize();
  RandomGraph out;
  out.graph = g;
  for (int m = 1; m <= layers; ++m) {
    graph::SubgraphSpec s;
    s.category = "random";
    s.hop = m;
    s.root = n / 2 + rng.below(n - n / 2);
    s.members = {s.root};
    out.catalog.push_back(s);
  }
  return out;
}

inline std::vector<graph::NodeFeatures> random_features(const graph::NetGraph& g, CounterRng& rng) {
  std::vector<graph::NodeFeatures> f(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.node(v).is_weight()) {
      const auto c = graph::QuantChoice::from_index(static_cast<int>(rng.below(graph::kNumChoices)));
      f[v] = graph::weight_features(g, v, c, rng.uniform(0.0, 1.0), rng.uniform(0.05, 0.5));
    } else {
      f[v] = graph::base_features(g, v);
    }
  }
  return f;
}

// `count` samples on one random graph with distinct random features and
// distinct targets.
inline std::vector<surrogate::GraphSample> random_samples(std::size_t nodes, int layers, std::size_t count,
                                                          std::uint64_t seed) {
  CounterRng rng(seed, 17);
  const auto rg = random_graph(nodes, layers, rng);
  auto hops = std::make_shared<const surrogate::HopSets>(surrogate::make_hop_sets(*rg.graph, rg.catalog, layers));
  std::vector<surrogate::GraphSample> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({rg.graph, hops, random_features(*rg.graph, rng), rng.normal()});
  return out;
}

}  // namespace mixq::testing
