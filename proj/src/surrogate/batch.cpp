#include "mixq/surrogate/batch.hpp"

#include <numeric>

#include "mixq/core/errors.hpp"

namespace mixq::surrogate {

HopSets make_hop_sets(const graph::NetGraph& g, const std::vector<graph::SubgraphSpec>& catalog, int layers) {
  HopSets h;
  h.designated.resize(static_cast<std::size_t>(layers) + 1);
  h.designated[0] = g.weight_nodes();
  for (const auto& s : catalog) {
    if (s.hop < 1 || s.hop > layers) continue;
    h.designated[static_cast<std::size_t>(s.hop)].push_back(s.root);
  }
  return h;
}

std::vector<int> default_active_hops(const std::vector<graph::SubgraphSpec>& catalog, int layers) {
  std::vector<int> hops{0};
  for (int m : graph::catalog_hops(catalog))
    if (m > 0 && m <= layers) hops.push_back(m);
  return hops;
}

GraphSample make_sample(const graph::AnnotatedGraph& ag, std::shared_ptr<const HopSets> hops, double y) {
  return GraphSample{ag.graph, std::move(hops), ag.features, y};
}

Batch make_batch(const std::vector<GraphSample>& samples, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw UsageError("empty batch");
  Batch b;
  b.graphs = idx.size();
  const std::size_t levels = samples.at(idx[0]).hops->designated.size();
  b.hop_ptr.assign(levels, std::vector<std::size_t>{0});
  b.hop_nodes.assign(levels, {});
  b.node_ptr.push_back(0);
  b.in_ptr.push_back(0);
  for (auto i : idx) {
    const auto& s = samples.at(i);
    const auto& g = *s.graph;
    if (s.features.size() != g.size()) throw DataError("sample features do not match its graph");
    if (s.hops->designated.size() != levels) throw DataError("samples disagree on the number of hop levels");
    const std::size_t base = b.nodes;
    for (std::size_t v = 0; v < g.size(); ++v) {
      const auto& f = s.features[v];
      b.method.push_back(f.method);
      b.bits.push_back(f.bits);
      b.op.push_back(f.op_type);
      b.block.push_back(f.block);
      b.scalars.push_back(f.epsilon);
      b.scalars.push_back(f.size_ratio);
      b.graph_of.push_back(b.y.size());
      b.in_src.push_back(base + v);
      for (auto p : g.preds(v)) b.in_src.push_back(base + p);
      b.in_ptr.push_back(b.in_src.size());
    }
    b.nodes += g.size();
    b.node_ptr.push_back(b.nodes);
    for (std::size_t m = 0; m < levels; ++m) {
      for (auto v : s.hops->designated[m]) b.hop_nodes[m].push_back(base + v);
      b.hop_ptr[m].push_back(b.hop_nodes[m].size());
    }
    b.y.push_back(s.y);
  }
  return b;
}

Batch make_batch(const std::vector<GraphSample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(samples, idx);
}

}  // namespace mixq::surrogate
