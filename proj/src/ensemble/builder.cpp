#include "mixq/ensemble/builder.hpp"

#include <algorithm>
#include <string>

#include "mixq/core/errors.hpp"
#include "mixq/core/parallel.hpp"
#include "mixq/surrogate/model.hpp"

namespace mixq::ensemble {

using graph::QuantChoice;

ScoringBase ScoringBase::from(const oracle::ToyModel& model) { return {model.graph, model.catalog, &model.table}; }

std::string choice_label(QuantChoice c) {
  static constexpr char kLetter[] = {'C', 'A', 'U'};
  return std::to_string(c.bits) + kLetter[static_cast<int>(c.method)];
}

std::vector<std::vector<int>> enumerate_assignments(std::size_t n) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= graph::kNumChoices;
  std::vector<std::vector<int>> out(total, std::vector<int>(n));
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t r = c;
    for (std::size_t j = n; j-- > 0;) {
      out[c][j] = static_cast<int>(r % graph::kNumChoices);
      r /= graph::kNumChoices;
    }
  }
  return out;
}

Scorer::Scorer(const Ensemble& ens, ScoringBase base, BuildOptions opts)
    : ens_(ens), base_(std::move(base)), opts_(opts) {
  if (!base_.graph || !base_.table) throw UsageError("scoring needs a graph and its quantization table");
  if (ens_.members.empty()) throw UsageError("empty ensemble");
  if (opts_.batch < 1) opts_.batch = 1;
  hops_ = std::make_shared<const surrogate::HopSets>(
      surrogate::make_hop_sets(*base_.graph, base_.catalog, ens_.spec.dims.layers));
  const auto ref = graph::QuantConfig::uniform(*base_.graph, opts_.reference);
  reference_ = graph::apply_config(base_.graph, ref, *base_.table).features;
}

std::vector<double> Scorer::score(const std::vector<Query>& queries, std::vector<ScoreRow>* rows) const {
  const auto& g = *base_.graph;
  const auto& wn = g.weight_nodes();
  for (const auto& q : queries) {
    if (!ens_.has_hop(q.hop)) throw UsageError("hop " + std::to_string(q.hop) + " is not an active hop of the ensemble");
    if (q.root >= g.size() || q.slots.size() != q.choices.size()) throw UsageError("malformed score query");
    for (std::size_t j = 0; j < q.slots.size(); ++j)
      if (q.slots[j] >= wn.size() || q.choices[j] < 0 || q.choices[j] >= graph::kNumChoices)
        throw UsageError("score query has an invalid slot or choice");
  }
  const std::size_t M = ens_.members.size();
  std::vector<double> total(queries.size(), 0.0);
  // raw norms per (query, member)
  std::vector<double> raw(queries.size() * M, 0.0);
  const std::size_t chunks = (queries.size() + opts_.batch - 1) / opts_.batch;
  parallel_for(
      chunks,
      [&](std::size_t ci) {
        const std::size_t q0 = ci * opts_.batch, q1 = std::min(queries.size(), q0 + opts_.batch);
        std::vector<surrogate::GraphSample> samples;
        samples.reserve(q1 - q0);
        for (std::size_t qi = q0; qi < q1; ++qi) {
          const auto& q = queries[qi];
          auto f = reference_;
          for (std::size_t j = 0; j < q.slots.size(); ++j) {
            const auto s = q.slots[j];
            const auto& o = base_.table->outcome(s, q.choices[j]);
            f[wn[s]] = graph::weight_features(g, wn[s], QuantChoice::from_index(q.choices[j]), o.epsilon, o.size_ratio);
          }
          samples.push_back({base_.graph, hops_, std::move(f), 0.0});
        }
        const auto b = surrogate::make_batch(samples);
        int max_hop = 0;
        for (std::size_t qi = q0; qi < q1; ++qi) max_hop = std::max(max_hop, queries[qi].hop);
        surrogate::ForwardCache cache;
        for (std::size_t k = 0; k < M; ++k) {
          const auto& p = ens_.members[k].params;
          surrogate::forward(p, b, surrogate::Mode::Eval, cache, max_hop);
          for (std::size_t qi = q0; qi < q1; ++qi) {
            const auto& q = queries[qi];
            raw[qi * M + k] = surrogate::node_norm(cache, b.node_ptr[qi - q0] + q.root, q.hop, p.dims.hidden);
          }
        }
      },
      opts_.threads);

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    for (std::size_t k = 0; k < M; ++k) {
      const auto& h = ens_.members[k].hop(q.hop);
      const double r = raw[qi * M + k];
      const double z = h.usable ? (r - h.mean) / h.std : 0.0;
      const double w = h.weight * z;
      total[qi] += w;
      if (rows) {
        ScoreRow row;
        for (std::size_t j = 0; j < q.slots.size(); ++j) {
          if (j) row.candidate += ';';
          row.candidate += g.node(wn[q.slots[j]]).id + "=" + choice_label(QuantChoice::from_index(q.choices[j]));
        }
        row.hop = q.hop;
        row.member = ens_.members[k].fold;
        row.raw = r;
        row.standardized = z;
        row.weighted = w;
        rows->push_back(std::move(row));
      }
    }
  }
  return total;
}

OpLevelResult build_op_level(const ScoringBase& base, const Ensemble& ens, const BuildOptions& opts) {
  Scorer scorer(ens, base, opts);
  const auto& g = *base.graph;
  const auto& wn = g.weight_nodes();
  std::vector<Query> queries;
  for (std::size_t s = 0; s < wn.size(); ++s)
    for (int c = 0; c < graph::kNumChoices; ++c) queries.push_back({wn[s], 0, {s}, {c}});
  OpLevelResult res;
  std::vector<ScoreRow> rows;
  const auto scores = scorer.score(queries, opts.keep_rows ? &rows : nullptr);
  for (auto& r : rows) {
    r.level = "op";
    r.target = r.candidate.substr(0, r.candidate.find('='));
  }
  res.rows = std::move(rows);
  res.scores.resize(wn.size());
  res.config.choices.resize(wn.size());
  for (std::size_t s = 0; s < wn.size(); ++s) {
    int best = 0;
    for (int c = 0; c < graph::kNumChoices; ++c) {
      res.scores[s][c] = scores[s * graph::kNumChoices + c];
      if (res.scores[s][c] > res.scores[s][best]) best = c;
    }
    res.config.choices[s] = QuantChoice::from_index(best);
  }
  return res;
}

BlockLevelResult build_block_level(const ScoringBase& base, const Ensemble& ens, const BuildOptions& opts) {
  Scorer scorer(ens, base, opts);
  const auto& g = *base.graph;
  BlockLevelResult res;
  res.config.choices.assign(g.weight_nodes().size(), opts.reference);
  std::vector<char> assigned(g.weight_nodes().size(), 0);
  for (std::size_t si = 0; si < base.catalog.size(); ++si) {
    const auto& sg = base.catalog[si];
    const std::size_t w = sg.weight_members.size();
    if (w == 0) continue;
    if (w > opts.enumeration_limit)
      throw UsageError("subgraph '" + g.node(sg.root).id + "' has " + std::to_string(w) +
                       " weight layers, above the enumeration limit of " + std::to_string(opts.enumeration_limit) +
                       "; split it into smaller subgraphs");
    std::vector<std::size_t> slots;
    for (auto v : sg.weight_members) slots.push_back(static_cast<std::size_t>(g.weight_slot(v)));
    const auto cands = enumerate_assignments(w);
    std::vector<Query> queries;
    queries.reserve(cands.size());
    for (const auto& c : cands) queries.push_back({sg.root, sg.hop, slots, c});
    std::vector<ScoreRow> rows;
    const auto scores = scorer.score(queries, opts.keep_rows ? &rows : nullptr);
    for (auto& r : rows) {
      r.level = "block";
      r.target = g.node(sg.root).id;
      r.category = sg.category;
    }
    res.rows.insert(res.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));

    auto bits_of = [&](const std::vector<int>& c) {
      int b = 0;
      for (int x : c) b += QuantChoice::from_index(x).bits;
      return b;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (scores[i] > scores[best] || (scores[i] == scores[best] && bits_of(cands[i]) < bits_of(cands[best])))
        best = i;
    }
    SubgraphChoice sc;
    sc.index = si;
    sc.candidates = cands.size();
    sc.best = cands[best];
    sc.score = scores[best];
    for (std::size_t j = 0; j < w; ++j) {
      res.config.choices[slots[j]] = QuantChoice::from_index(sc.best[j]);
      assigned[slots[j]] = 1;
    }
    res.subgraphs.push_back(std::move(sc));
  }
  for (std::size_t s = 0; s < assigned.size(); ++s)
    if (!assigned[s])
      throw DataError("weight node '" + g.node(g.weight_nodes()[s]).id + "' is not covered by the catalog");
  return res;
}

}  // namespace mixq::ensemble
