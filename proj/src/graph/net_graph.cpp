#include "mixq/graph/net_graph.hpp"

#include <algorithm>
#include <deque>

#include "mixq/core/errors.hpp"

namespace mixq::graph {

std::string_view to_string(NodeKind k) { return k == NodeKind::Weight ? "weight" : "passthrough"; }

std::string_view to_string(Compute c) {
  switch (c) {
    case Compute::Input: return "input";
    case Compute::Linear: return "linear";
    case Compute::Add: return "add";
    case Compute::AttnScores: return "attn_scores";
    case Compute::AttnApply: return "attn_apply";
    case Compute::Norm: return "norm";
  }
  return "?";
}

NodeKind parse_node_kind(std::string_view s) {
  if (s == "weight") return NodeKind::Weight;
  if (s == "passthrough") return NodeKind::Passthrough;
  throw DataError("unknown node kind '" + std::string(s) + "'");
}

Compute parse_compute(std::string_view s) {
  for (auto c : {Compute::Input, Compute::Linear, Compute::Add, Compute::AttnScores, Compute::AttnApply,
                 Compute::Norm})
    if (to_string(c) == s) return c;
  throw DataError("unknown compute kind '" + std::string(s) + "'");
}

const std::vector<std::string>& op_type_vocabulary() {
  static const std::vector<std::string> vocab{
      "input",       "t_embed",    "c_embed",    "patchify",    "modulate",   "attn_q",
      "attn_k",      "attn_v",     "attn_scores", "attn_apply", "attn_out",   "residual",
      "xattn_q",     "xattn_k",    "xattn_v",    "xattn_out",   "ff_1",       "ff_2",
      "norm_out",    "proj_out",   "conv_in",    "conv_out",    "upsample",   "downsample",
      "res_conv_in", "res_temb",   "res_conv_out", "res_skip",  "tf_proj_in", "tf_proj_out",
  };
  return vocab;
}

int op_type_code(std::string_view label) {
  const auto& v = op_type_vocabulary();
  const auto it = std::find(v.begin(), v.end(), label);
  if (it == v.end()) throw DataError("unknown op type '" + std::string(label) + "'");
  return static_cast<int>(it - v.begin());
}

std::size_t NetGraph::add_node(OpNode node) {
  if (finalized_) throw UsageError("graph is finalized");
  if (node.id.empty()) throw DataError("node id must be nonempty");
  if (by_id_.count(node.id)) throw DataError("duplicate node id '" + node.id + "'");
  const std::size_t i = nodes_.size();
  by_id_.emplace(node.id, i);
  nodes_.push_back(std::move(node));
  return i;
}

void NetGraph::add_edge(std::size_t src, std::size_t dst) {
  if (finalized_) throw UsageError("graph is finalized");
  if (src >= nodes_.size() || dst >= nodes_.size()) throw DataError("edge endpoint out of range");
  if (src == dst) throw DataError("self-loop on node '" + nodes_[src].id + "'");
  edges_.emplace_back(src, dst);
}

void NetGraph::add_edge(std::string_view src, std::string_view dst) {
  const auto s = by_id_.find(std::string(src));
  const auto d = by_id_.find(std::string(dst));
  if (s == by_id_.end() || d == by_id_.end())
    throw DataError("edge references unknown node: " + std::string(src) + " -> " + std::string(dst));
  add_edge(s->second, d->second);
}

void NetGraph::finalize() {
  const std::size_t n = nodes_.size();
  preds_.assign(n, {});
  succs_.assign(n, {});
  for (auto [s, d] : edges_) {
    if (std::find(preds_[d].begin(), preds_[d].end(), s) != preds_[d].end())
      throw DataError("duplicate edge " + nodes_[s].id + " -> " + nodes_[d].id);
    preds_[d].push_back(s);
    succs_[s].push_back(d);
  }
  weight_nodes_.clear();
  slot_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nd = nodes_[i];
    if (nd.is_weight() != !nd.weight_ref.empty())
      throw DataError("node '" + nd.id + "': weight_ref must be present iff the node is a weight layer");
    if (nd.is_weight() && nd.compute != Compute::Linear)
      throw DataError("node '" + nd.id + "': weight layers must be linear");
    if (nd.is_weight() && preds_[i].empty()) throw DataError("weight node '" + nd.id + "' has no input");
    if (nd.compute == Compute::Input && !preds_[i].empty())
      throw DataError("input node '" + nd.id + "' has predecessors");
    op_type_code(nd.op_type);
    if (nd.is_weight()) {
      slot_[i] = static_cast<int>(weight_nodes_.size());
      weight_nodes_.push_back(i);
    }
  }
  // Kahn's algorithm; the smallest ready index goes first so the order is
  // canonical.
  std::vector<std::size_t> indeg(n);
  for (std::size_t i = 0; i < n; ++i) indeg[i] = preds_[i].size();
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  topo_.clear();
  while (!ready.empty()) {
    const auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t v = *it;
    ready.erase(it);
    topo_.push_back(v);
    for (auto s : succs_[v])
      if (--indeg[s] == 0) ready.push_back(s);
  }
  if (topo_.size() != n) throw DataError("graph '" + family_ + "' contains a cycle");
  finalized_ = true;
}

void NetGraph::require_finalized() const {
  if (!finalized_) throw UsageError("graph not finalized");
}

std::size_t NetGraph::index_of(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) throw DataError("unknown node '" + std::string(id) + "'");
  return it->second;
}

bool NetGraph::contains(std::string_view id) const { return by_id_.count(std::string(id)) != 0; }

std::size_t NetGraph::in_dim(std::size_t i) const {
  require_finalized();
  const auto& p = preds_.at(i);
  if (p.empty()) return nodes_[i].out_dim;
  return nodes_[p.front()].out_dim;
}

std::vector<std::size_t> m_hop_neighborhood(const NetGraph& g, std::size_t v, int m) {
  if (v >= g.size()) throw DataError("m_hop_neighborhood: unknown node");
  if (m < 0) throw UsageError("m_hop_neighborhood: m must be >= 0");
  std::vector<int> dist(g.size(), -1);
  std::deque<std::size_t> q{v};
  dist[v] = 0;
  std::vector<std::size_t> out;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop_front();
    out.push_back(u);
    if (dist[u] == m) continue;
    for (auto p : g.preds(u)) {
      if (dist[p] >= 0) continue;
      dist[p] = dist[u] + 1;
      q.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

boost::multiprecision::cpp_int search_space_size(std::size_t weight_nodes) {
  boost::multiprecision::cpp_int r = 1;
  for (std::size_t i = 0; i < weight_nodes; ++i) r *= 6;
  return r;
}

boost::multiprecision::cpp_int search_space_size(const NetGraph& g) {
  return search_space_size(g.weight_nodes().size());
}

}  // namespace mixq::graph
