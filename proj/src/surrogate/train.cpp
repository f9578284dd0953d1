#include "mixq/surrogate/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"
#include "mixq/graph/net_graph.hpp"

namespace mixq::surrogate {
namespace {

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
constexpr std::uint64_t kShuffleStream = 0x5eedf00d;

bool constant(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

struct AdamW {
  std::vector<Tensor> m, v;
  long step = 0;

  explicit AdamW(const std::vector<Tensor>& params) : m(zeros_like(params)), v(zeros_like(params)) {}

  void apply(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr, double wd) {
    ++step;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto& p = params[t].v;
      const auto& g = grads[t].v;
      auto& mt = m[t].v;
      auto& vt = v[t].v;
      for (std::size_t i = 0; i < p.size(); ++i) {
        mt[i] = kBeta1 * mt[i] + (1.0 - kBeta1) * g[i];
        vt[i] = kBeta2 * vt[i] + (1.0 - kBeta2) * g[i] * g[i];
        const double mh = mt[i] / c1, vh = vt[i] / c2;
        p[i] -= lr * (mh / (std::sqrt(vh) + kAdamEps) + wd * p[i]);
      }
    }
  }
};

}  // namespace

TargetScaler fit_scaler(const std::vector<GraphSample>& samples) {
  if (samples.empty()) throw DataError("cannot fit a target scaler on an empty corpus");
  TargetScaler s;
  double sum = 0.0;
  for (const auto& x : samples) sum += x.y;
  s.mean = sum / static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& x : samples) var += (x.y - s.mean) * (x.y - s.mean);
  var /= static_cast<double>(samples.size());
  if (!std::isfinite(s.mean) || !std::isfinite(var)) throw NumericError("training targets are not finite");
  s.std = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

CompositeLoss composite_loss(const ForwardCache& cache, const std::vector<double>& y_std,
                             const std::vector<int>& active_hops, RankLossKind kind, double tau,
                             std::vector<double>& dpred, std::vector<std::vector<double>>& dhop) {
  const std::size_t B = cache.pred.size();
  if (y_std.size() != B) throw UsageError("composite loss: target count does not match the batch");
  CompositeLoss out;
  dpred.assign(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    const double r = cache.pred[i] - y_std[i];
    out.orig += r * r;
    dpred[i] = 2.0 * r / static_cast<double>(B);
  }
  out.orig /= static_cast<double>(B);
  out.total = out.orig;
  dhop.assign(cache.hop_norm.size(), {});
  out.rank.assign(active_hops.size(), 0.0);
  if (B < 2 || constant(y_std) || active_hops.empty()) {
    out.rank_skipped = !active_hops.empty();
    return out;
  }
  const double w = 1.0 / static_cast<double>(active_hops.size());
  std::uint64_t sig = 0;
  for (std::size_t a = 0; a < active_hops.size(); ++a) {
    const auto m = static_cast<std::size_t>(active_hops[a]);
    if (m >= cache.hop_norm.size() || cache.hop_norm[m].empty())
      throw UsageError("composite loss: hop " + std::to_string(m) + " has no designated nodes");
    auto lg = rank_loss(kind, cache.hop_norm[m], y_std, tau);
    out.rank[a] = lg.loss;
    out.total += w * lg.loss;
    auto& d = dhop[m];
    if (d.empty()) d.assign(B, 0.0);
    for (std::size_t i = 0; i < B; ++i) d[i] += w * lg.grad[i];
    sig = splitmix64(sig ^ lg.signature);
  }
  out.signature = sig;
  return out;
}

TrainResult train(const std::vector<GraphSample>& corpus, const TrainSpec& spec) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  if (spec.epochs < 0) throw UsageError("epochs must be >= 0");
  if (spec.batch_size < 1) throw UsageError("batch size must be >= 1");
  if (!(spec.lr > 0.0)) throw UsageError("learning rate must be positive");
  const auto& hops = *corpus.front().hops;
  if (hops.designated.size() != static_cast<std::size_t>(spec.dims.layers) + 1)
    throw UsageError("hop sets were built for a different number of layers");

  TrainResult res;
  res.params = init_params(spec.dims, static_cast<int>(graph::op_type_vocabulary().size()), spec.seed);
  res.scaler = fit_scaler(corpus);
  res.active_hops = spec.active_hops;
  if (res.active_hops.empty())
    for (int m = 0; m <= spec.dims.layers; ++m)
      if (hops.active(m)) res.active_hops.push_back(m);
  for (int m : res.active_hops)
    if (!hops.active(m)) throw UsageError("active hop " + std::to_string(m) + " has no designated nodes");

  AdamW opt(res.params.tensors);
  auto grads = zeros_like(res.params.tensors);
  std::vector<std::size_t> order(corpus.size());
  const CounterRng shuffle_root(spec.seed, kShuffleStream);
  ForwardCache cache;
  std::vector<double> dpred, ystd;
  std::vector<std::vector<double>> dhop;

  for (int e = 0; e < spec.epochs; ++e) {
    const double lr =
        0.5 * spec.lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) / static_cast<double>(spec.epochs)));
    std::iota(order.begin(), order.end(), 0);
    auto rng = shuffle_root.substream(static_cast<std::uint64_t>(e));
    shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = e;
    log.lr = lr;
    log.rank.assign(res.active_hops.size(), 0.0);
    std::size_t batches = 0, ranked = 0;
    for (std::size_t s = 0; s < order.size(); s += spec.batch_size) {
      const std::size_t end = std::min(order.size(), s + spec.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch b = make_batch(corpus, idx);
      // BN in train mode needs at least two rows; a lone graph runs in eval mode.
      const Mode mode = b.nodes >= 2 ? Mode::Train : Mode::Eval;
      forward(res.params, b, mode, cache);
      ystd.resize(b.y.size());
      for (std::size_t i = 0; i < b.y.size(); ++i) ystd[i] = res.scaler.to_std(b.y[i]);
      const auto L = composite_loss(cache, ystd, res.active_hops, spec.rank_loss, spec.tau, dpred, dhop);
      if (!std::isfinite(L.total))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(e) + ", batch " +
                           std::to_string(batches));
      if (L.rank_skipped) ++res.skipped_rank_batches;
      for (auto& g : grads) std::fill(g.v.begin(), g.v.end(), 0.0);
      backward(res.params, b, cache, dpred, dhop, grads);
      opt.apply(res.params.tensors, grads, lr, spec.weight_decay);
      if (mode == Mode::Train && spec.update_running_stats) update_running_stats(res.params, cache);
      log.orig += L.orig;
      if (!L.rank_skipped) {
        for (std::size_t a = 0; a < L.rank.size(); ++a) log.rank[a] += L.rank[a];
        ++ranked;
      }
      ++batches;
    }
    log.orig /= static_cast<double>(batches);
    for (auto& r : log.rank) r = ranked ? r / static_cast<double>(ranked) : 0.0;
    if (!res.params.all_finite())
      throw NumericError("training diverged: non-finite parameters after epoch " + std::to_string(e));
    res.log.push_back(std::move(log));
  }
  return res;
}

Inference infer(const SurrogateParams& p, const TargetScaler& scaler, const std::vector<GraphSample>& samples,
                std::size_t batch_size) {
  Inference out;
  if (samples.empty()) return out;
  if (batch_size < 1) batch_size = 1;
  const std::size_t levels = samples.front().hops->designated.size();
  out.pred.reserve(samples.size());
  out.hop_norm.assign(levels, {});
  ForwardCache cache;
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < samples.size(); s += batch_size) {
    const std::size_t end = std::min(samples.size(), s + batch_size);
    idx.resize(end - s);
    std::iota(idx.begin(), idx.end(), s);
    forward(p, make_batch(samples, idx), Mode::Eval, cache);
    for (double v : cache.pred) out.pred.push_back(scaler.from_std(v));
    for (std::size_t m = 0; m < levels; ++m) {
      if (cache.hop_norm[m].empty()) continue;
      out.hop_norm[m].insert(out.hop_norm[m].end(), cache.hop_norm[m].begin(), cache.hop_norm[m].end());
    }
  }
  return out;
}

}  // namespace mixq::surrogate
