#include "mixq/graph/annotate.hpp"

#include "mixq/core/errors.hpp"

namespace mixq::graph {

int QuantChoice::index() const {
  if (bits != 3 && bits != 4) throw DataError("bits must be 3 or 4, got " + std::to_string(bits));
  return (bits - 3) * 3 + static_cast<int>(method);
}

QuantChoice QuantChoice::from_index(int i) {
  if (i < 0 || i >= kNumChoices) throw DataError("choice index out of range");
  return QuantChoice{static_cast<quant::QuantMethod>(i % 3), 3 + i / 3};
}

QuantConfig QuantConfig::uniform(const NetGraph& g, QuantChoice c) {
  QuantConfig q;
  q.choices.assign(g.weight_nodes().size(), c);
  return q;
}

std::string QuantConfig::key() const {
  std::string k;
  k.reserve(choices.size());
  for (const auto& c : choices) k.push_back(static_cast<char>('0' + c.index()));
  return k;
}

QuantConfig config_from_map(const NetGraph& g, const std::map<std::string, QuantChoice>& m) {
  QuantConfig c;
  c.choices.resize(g.weight_nodes().size());
  std::string missing, unknown;
  for (std::size_t s = 0; s < g.weight_nodes().size(); ++s) {
    const auto& id = g.node(g.weight_nodes()[s]).id;
    const auto it = m.find(id);
    if (it == m.end()) {
      missing += (missing.empty() ? "" : ", ") + id;
      continue;
    }
    it->second.index();
    c.choices[s] = it->second;
  }
  for (const auto& [id, ch] : m)
    if (!g.contains(id) || !g.node(g.index_of(id)).is_weight()) unknown += (unknown.empty() ? "" : ", ") + id;
  std::string msg;
  if (!missing.empty()) msg = "config is missing weight nodes: " + missing;
  if (!unknown.empty()) msg += (msg.empty() ? "" : "; ") + ("config names non-weight or unknown nodes: " + unknown);
  if (!msg.empty()) throw DataError(msg);
  return c;
}

std::map<std::string, QuantChoice> config_to_map(const NetGraph& g, const QuantConfig& c) {
  if (c.choices.size() != g.weight_nodes().size()) throw DataError("config size does not match graph");
  std::map<std::string, QuantChoice> m;
  for (std::size_t s = 0; s < c.choices.size(); ++s) m.emplace(g.node(g.weight_nodes()[s]).id, c.choices[s]);
  return m;
}

QuantTable::QuantTable(const NetGraph& g, const std::vector<quant::WeightTensor>& weights, double p_norm,
                       const quant::KMeansOptions& kopts) {
  const auto& wn = g.weight_nodes();
  if (weights.size() != wn.size()) throw DataError("weight store does not match the graph's weight nodes");
  table_.resize(wn.size());
  sizes_.resize(wn.size());
  for (std::size_t s = 0; s < wn.size(); ++s) {
    const auto& w = weights[s];
    if (w.rows() != g.node(wn[s]).out_dim || w.cols() != g.in_dim(wn[s]))
      throw DataError("weight shape mismatch at node '" + g.node(wn[s]).id + "'");
    sizes_[s] = w.size();
    for (int ci = 0; ci < kNumChoices; ++ci) {
      const auto ch = QuantChoice::from_index(ci);
      table_[s][ci] = quant::quantize_and_measure(w, ch.method, ch.bits, p_norm, kopts);
    }
  }
}

NodeFeatures base_features(const NetGraph& g, std::size_t node) {
  const auto& n = g.node(node);
  NodeFeatures f;
  f.op_type = op_type_code(n.op_type);
  f.block = n.block_index;
  return f;
}

NodeFeatures weight_features(const NetGraph& g, std::size_t node, QuantChoice c, double epsilon,
                             double size_ratio) {
  NodeFeatures f = base_features(g, node);
  f.method = 1 + static_cast<int>(c.method);
  f.bits = c.bits - 2;
  f.epsilon = epsilon;
  f.size_ratio = size_ratio;
  return f;
}

namespace {

void check_cover(const NetGraph& g, const QuantConfig& config) {
  const auto& wn = g.weight_nodes();
  if (config.choices.size() == wn.size()) return;
  if (config.choices.size() > wn.size()) throw DataError("config has more entries than weight nodes");
  std::string ids;
  for (std::size_t s = config.choices.size(); s < wn.size(); ++s) ids += " " + g.node(wn[s]).id;
  throw DataError("config is missing weight nodes:" + ids);
}

}  // namespace

AnnotatedGraph apply_config(std::shared_ptr<const NetGraph> g, const QuantConfig& config, const QuantTable& table) {
  const auto& wn = g->weight_nodes();
  check_cover(*g, config);
  if (table.slots() != wn.size()) throw DataError("quantization table does not match the graph");
  AnnotatedGraph ag;
  ag.config = config;
  ag.features.resize(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) ag.features[i] = base_features(*g, i);
  ag.bit_cost.resize(wn.size());
  ag.elements.resize(wn.size());
  for (std::size_t s = 0; s < wn.size(); ++s) {
    const auto& o = table.outcome(s, config.choices[s].index());
    ag.features[wn[s]] = weight_features(*g, wn[s], config.choices[s], o.epsilon, o.size_ratio);
    ag.bit_cost[s] = o.bit_cost;
    ag.elements[s] = table.element_count(s);
  }
  ag.graph = std::move(g);
  return ag;
}

AnnotatedGraph apply_config(std::shared_ptr<const NetGraph> g, const QuantConfig& config,
                            const std::vector<quant::WeightTensor>& weights, double p_norm) {
  const auto& wn = g->weight_nodes();
  check_cover(*g, config);
  if (weights.size() != wn.size()) throw DataError("weight store does not match the graph's weight nodes");
  AnnotatedGraph ag;
  ag.config = config;
  ag.features.resize(g->size());
  for (std::size_t i = 0; i < g->size(); ++i) ag.features[i] = base_features(*g, i);
  ag.bit_cost.resize(wn.size());
  ag.elements.resize(wn.size());
  for (std::size_t s = 0; s < wn.size(); ++s) {
    const auto c = config.choices[s];
    const auto o = quant::quantize_and_measure(weights[s], c.method, c.bits, p_norm);
    ag.features[wn[s]] = weight_features(*g, wn[s], c, o.epsilon, o.size_ratio);
    ag.bit_cost[s] = o.bit_cost;
    ag.elements[s] = weights[s].size();
  }
  ag.graph = std::move(g);
  return ag;
}

double average_bits(const AnnotatedGraph& ag, bool include_overhead) {
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < ag.elements.size(); ++s) {
    const auto n = static_cast<double>(ag.elements[s]);
    num += include_overhead ? static_cast<double>(ag.bit_cost[s]) : n * ag.config.choices[s].bits;
    den += n;
  }
  return den > 0.0 ? num / den : 0.0;
}

double average_bits(const NetGraph& g, const QuantConfig& config) {
  const auto& wn = g.weight_nodes();
  if (config.choices.size() != wn.size()) throw DataError("config size does not match graph");
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < wn.size(); ++s) {
    const auto n = static_cast<double>(g.node(wn[s]).out_dim * g.in_dim(wn[s]));
    num += n * config.choices[s].bits;
    den += n;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace mixq::graph
