#include "mixq/surrogate/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mixq/core/rng.hpp"
#include "mixq/surrogate/train.hpp"

namespace mixq::surrogate {
namespace {

struct Probe {
  double loss;
  std::uint64_t signature;
};

// Which side of zero every ReLU / LeakyReLU input lies on. A probe that
// flips one of them straddles a kink where central differences are invalid.
std::uint64_t activation_signature(const ForwardCache& c) {
  std::uint64_t sig = 0x9e3779b97f4a7c15ULL;
  std::uint64_t word = 0;
  int nbits = 0;
  auto fold = [&](const std::vector<double>& v) {
    for (double x : v) {
      word = (word << 1) | (x > 0.0);
      if (++nbits == 64) {
        sig = splitmix64(sig ^ word);
        word = 0;
        nbits = 0;
      }
    }
  };
  fold(c.bn0.out);
  for (const auto& l : c.layer) {
    fold(l.u);
    fold(l.bn.out);
  }
  fold(c.a2);
  return splitmix64(sig ^ word ^ static_cast<std::uint64_t>(nbits));
}

Probe evaluate(const SurrogateParams& p, const Batch& b, const std::vector<double>& y, const std::vector<int>& hops,
               const GradCheckSpec& spec, ForwardCache& cache, std::vector<double>& dpred,
               std::vector<std::vector<double>>& dhop) {
  forward(p, b, spec.mode, cache);
  const auto L = composite_loss(cache, y, hops, spec.rank_loss, spec.tau, dpred, dhop);
  return {L.total, splitmix64(L.signature ^ activation_signature(cache))};
}

}  // namespace

GradCheckReport grad_check(const SurrogateParams& p, const Batch& b, const std::vector<double>& y_std,
                           const GradCheckSpec& spec) {
  std::vector<int> hops;
  if (spec.use_rank) {
    hops = spec.active_hops;
    if (hops.empty())
      for (std::size_t m = 0; m < b.hop_nodes.size() && m <= static_cast<std::size_t>(p.dims.layers); ++m)
        if (!b.hop_nodes[m].empty()) hops.push_back(static_cast<int>(m));
  }

  ForwardCache cache;
  std::vector<double> dpred;
  std::vector<std::vector<double>> dhop;
  const auto base = evaluate(p, b, y_std, hops, spec, cache, dpred, dhop);
  auto grads = zeros_like(p.tensors);
  backward(p, b, cache, dpred, dhop, grads);

  GradCheckReport rep;
  double diff = 0.0, scale = 0.0;
  SurrogateParams q = p;
  std::vector<double> scratch_d;
  std::vector<std::vector<double>> scratch_h;
  for (std::size_t t = 0; t < p.tensors.size(); ++t) {
    TensorGradError te;
    te.name = p.tensors[t].name;
    double amax = 0.0, nmax = 0.0;
    for (std::size_t i = 0; i < p.tensors[t].size(); ++i) {
      const double orig = q.tensors[t].v[i];
      q.tensors[t].v[i] = orig + spec.step;
      const auto plus = evaluate(q, b, y_std, hops, spec, cache, scratch_d, scratch_h);
      q.tensors[t].v[i] = orig - spec.step;
      const auto minus = evaluate(q, b, y_std, hops, spec, cache, scratch_d, scratch_h);
      q.tensors[t].v[i] = orig;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++te.skipped;
        continue;
      }
      const double num = (plus.loss - minus.loss) / (2.0 * spec.step);
      const double ana = grads[t].v[i];
      te.max_abs_diff = std::max(te.max_abs_diff, std::fabs(ana - num));
      amax = std::max(amax, std::fabs(ana));
      nmax = std::max(nmax, std::fabs(num));
      ++te.checked;
    }
    te.max_abs_grad = std::max(amax, nmax);
    te.rel_error = te.max_abs_diff / std::max(te.max_abs_grad, 1e-12);
    diff = std::max(diff, te.max_abs_diff);
    scale = std::max(scale, te.max_abs_grad);
    rep.skipped += te.skipped;
    rep.tensors.push_back(std::move(te));
  }
  rep.max_rel_error = diff / std::max(scale, 1e-12);
  return rep;
}

}  // namespace mixq::surrogate
