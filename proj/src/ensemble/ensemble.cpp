#include "mixq/ensemble/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mixq/core/errors.hpp"
#include "mixq/core/parallel.hpp"
#include "mixq/core/rng.hpp"
#include "mixq/surrogate/metrics.hpp"
#include "mixq/surrogate/model.hpp"

namespace mixq::ensemble {

using surrogate::GraphSample;
using surrogate::RankLossKind;

const HopMetrics& EnsembleMember::hop(int m) const {
  for (const auto& h : hops)
    if (h.hop == m) return h;
  throw UsageError("hop " + std::to_string(m) + " is not active in this ensemble");
}

bool Ensemble::has_hop(int m) const { return std::find(active_hops.begin(), active_hops.end(), m) != active_hops.end(); }

double member_weight(RankLossKind kind, double srcc, double ndcg) {
  const double s = std::max(srcc, 0.0), n = std::max(ndcg, 0.0);
  switch (kind) {
    case RankLossKind::SoftSpearman: return s;
    case RankLossKind::LambdaRank: return n;
    case RankLossKind::Hybrid: return s * n;
  }
  return 0.0;
}

std::vector<GraphSample> make_samples(const oracle::ToyModel& model, const std::vector<oracle::ConfigRecord>& records,
                                      int layers) {
  auto hops = std::make_shared<const surrogate::HopSets>(surrogate::make_hop_sets(*model.graph, model.catalog, layers));
  std::vector<GraphSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.failed) continue;
    out.push_back(surrogate::make_sample(graph::apply_config(model.graph, r.config, model.table), hops, r.y));
  }
  return out;
}

std::vector<double> designated_norms(const surrogate::SurrogateParams& p, const std::vector<GraphSample>& s,
                                     const std::vector<std::size_t>& idx, int m) {
  std::vector<double> out;
  surrogate::ForwardCache cache;
  constexpr std::size_t kChunk = 128;
  for (std::size_t a = 0; a < idx.size(); a += kChunk) {
    const std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(a),
                                        idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), a + kChunk)));
    const auto b = surrogate::make_batch(s, part);
    if (static_cast<std::size_t>(m) >= b.hop_nodes.size()) throw UsageError("hop out of range");
    surrogate::forward(p, b, surrogate::Mode::Eval, cache, m);
    for (auto v : b.hop_nodes[static_cast<std::size_t>(m)]) out.push_back(surrogate::node_norm(cache, v, m, p.dims.hidden));
  }
  return out;
}

void evaluate_member(EnsembleMember& member, const std::vector<GraphSample>& samples,
                     const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                     const std::vector<int>& active_hops, RankLossKind kind) {
  std::vector<GraphSample> val;
  std::vector<double> y;
  for (auto i : val_idx) {
    val.push_back(samples.at(i));
    y.push_back(samples[i].y);
  }
  const auto inf = surrogate::infer(member.params, member.scaler, val);
  member.pred_srcc = val.size() >= 2 ? surrogate::spearman(inf.pred, y) : 0.0;
  member.hops.clear();
  for (int m : active_hops) {
    HopMetrics h;
    h.hop = m;
    if (val.size() >= 2) {
      const auto& score = inf.hop_norm.at(static_cast<std::size_t>(m));
      h.srcc = surrogate::spearman(score, y);
      h.ndcg = surrogate::ndcg_at_k(score, y, 10);
    }
    const auto norms = designated_norms(member.params, samples, train_idx, m);
    double sum = 0.0;
    for (double v : norms) sum += v;
    h.mean = norms.empty() ? 0.0 : sum / static_cast<double>(norms.size());
    double var = 0.0;
    for (double v : norms) var += (v - h.mean) * (v - h.mean);
    h.std = norms.empty() ? 0.0 : std::sqrt(var / static_cast<double>(norms.size()));
    h.usable = h.std > 0.0 && std::isfinite(h.std);
    h.weight = h.usable ? member_weight(kind, h.srcc, h.ndcg) : 0.0;
    member.hops.push_back(h);
  }
}

Ensemble train_ensemble(const std::vector<GraphSample>& samples, const surrogate::TrainSpec& spec,
                        const FoldPlan& plan, std::size_t threads) {
  if (plan.n != samples.size()) throw UsageError("fold plan does not match the corpus size");
  const std::size_t K = plan.validation.size();
  std::vector<std::optional<EnsembleMember>> slots(K);
  std::vector<std::string> errors(K);
  std::vector<std::vector<int>> hops(K);
  parallel_for(
      K,
      [&](std::size_t f) {
        surrogate::TrainSpec ms = spec;
        ms.seed = splitmix64(spec.seed + 0x9E3779B97F4A7C15ULL * (f + 1));
        std::vector<GraphSample> train;
        train.reserve(plan.train[f].size());
        for (auto i : plan.train[f]) train.push_back(samples.at(i));
        try {
          auto res = surrogate::train(train, ms);
          EnsembleMember m;
          m.fold = f;
          m.seed = ms.seed;
          m.params = std::move(res.params);
          m.scaler = res.scaler;
          m.log = std::move(res.log);
          hops[f] = res.active_hops;
          evaluate_member(m, samples, plan.train[f], plan.validation[f], res.active_hops, spec.rank_loss);
          slots[f] = std::move(m);
        } catch (const NumericError& e) {
          errors[f] = e.what();
        }
      },
      threads);

  Ensemble ens;
  ens.spec = spec;
  ens.plan = plan;
  for (std::size_t f = 0; f < K; ++f) {
    if (!slots[f]) {
      ens.warnings.push_back("member " + std::to_string(f) + " dropped: " + errors[f]);
      continue;
    }
    if (ens.active_hops.empty()) ens.active_hops = hops[f];
    ens.members.push_back(std::move(*slots[f]));
  }
  if (ens.members.empty()) throw NumericError("every ensemble member diverged");
  return ens;
}

}  // namespace mixq::ensemble
