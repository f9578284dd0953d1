#include "mixq/surrogate/rank_losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"

namespace mixq::surrogate {
namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9E3779B97F4A7C15ULL)); }

std::vector<std::size_t> order_desc(const std::vector<double>& x) {
  std::vector<std::size_t> o(x.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  return o;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(RankLossKind k) {
  switch (k) {
    case RankLossKind::SoftSpearman: return "srcc";
    case RankLossKind::LambdaRank: return "ndcg";
    case RankLossKind::Hybrid: return "hybrid";
  }
  return "?";
}

RankLossKind parse_rank_loss(std::string_view s) {
  if (s == "srcc") return RankLossKind::SoftSpearman;
  if (s == "ndcg") return RankLossKind::LambdaRank;
  if (s == "hybrid") return RankLossKind::Hybrid;
  throw UsageError("unknown rank loss '" + std::string(s) + "' (expected srcc, ndcg or hybrid)");
}

SoftRank soft_rank(const std::vector<double>& theta, double tau) {
  if (!(tau > 0.0)) throw UsageError("soft rank: tau must be positive");
  const std::size_t n = theta.size();
  SoftRank sr;
  sr.order = order_desc(theta);
  // Isotonic (non-increasing) regression of z_sorted - w, w = (n, ..., 1),
  // by pool-adjacent-violators.
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = theta[sr.order[k]] / tau - static_cast<double>(n - k);
  std::vector<double> sum;
  std::vector<std::size_t> start;
  for (std::size_t k = 0; k < n; ++k) {
    sum.push_back(y[k]);
    start.push_back(k);
    while (sum.size() >= 2) {
      const std::size_t last = sum.size() - 1;
      const double len_last = static_cast<double>(k + 1 - start[last]);
      const double len_prev = static_cast<double>(start[last] - start[last - 1]);
      if (sum[last - 1] / len_prev >= sum[last] / len_last) break;
      sum[last - 1] += sum[last];
      sum.pop_back();
      start.pop_back();
    }
  }
  sr.block_start = start;
  sr.block_start.push_back(n);
  sr.ranks.assign(n, 0.0);
  for (std::size_t bi = 0; bi + 1 < sr.block_start.size(); ++bi) {
    const std::size_t a = sr.block_start[bi], b = sr.block_start[bi + 1];
    const double v = sum[bi] / static_cast<double>(b - a);
    for (std::size_t k = a; k < b; ++k) sr.ranks[sr.order[k]] = theta[sr.order[k]] / tau - v;
  }
  return sr;
}

std::vector<double> soft_rank_vjp(const SoftRank& sr, const std::vector<double>& g, double tau) {
  std::vector<double> out(g.size());
  for (std::size_t bi = 0; bi + 1 < sr.block_start.size(); ++bi) {
    const std::size_t a = sr.block_start[bi], b = sr.block_start[bi + 1];
    double mean = 0.0;
    for (std::size_t k = a; k < b; ++k) mean += g[sr.order[k]];
    mean /= static_cast<double>(b - a);
    for (std::size_t k = a; k < b; ++k) out[sr.order[k]] = (g[sr.order[k]] - mean) / tau;
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> o(x.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < o.size();) {
    std::size_t j = i;
    while (j < o.size() && x[o[j]] == x[o[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) r[o[k]] = avg;
    i = j;
  }
  return r;
}

LossGrad soft_spearman_loss(const std::vector<double>& scores, const std::vector<double>& targets, double tau,
                            bool standardize) {
  const std::size_t n = scores.size();
  if (n < 2 || targets.size() != n) throw UsageError("soft Spearman: need >= 2 paired values");
  const auto tr = average_ranks(targets);
  const double tmean = std::accumulate(tr.begin(), tr.end(), 0.0) / static_cast<double>(n);
  std::vector<double> b(n);
  double bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = tr[i] - tmean;
    bb += b[i] * b[i];
  }
  if (bb == 0.0) throw DataError("soft Spearman: constant targets");

  LossGrad out;
  out.grad.assign(n, 0.0);
  out.loss = 1.0;
  std::vector<double> z = scores;
  double mu = 0.0, sd = 1.0;
  if (standardize) {
    mu = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double s : scores) var += (s - mu) * (s - mu);
    sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 1e-12 * (1.0 + std::fabs(mu)))) return out;  // no rank signal
    for (auto& v : z) v = (v - mu) / sd;
  }
  const auto sr = soft_rank(z, tau);
  const double rmean = std::accumulate(sr.ranks.begin(), sr.ranks.end(), 0.0) / static_cast<double>(n);
  std::vector<double> a(n);
  double aa = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = sr.ranks[i] - rmean;
    aa += a[i] * a[i];
    ab += a[i] * b[i];
  }
  std::uint64_t sig = 0x51u;
  for (auto o : sr.order) sig = mix(sig, o);
  for (auto s : sr.block_start) sig = mix(sig, s + 1000003);
  out.signature = sig;
  if (aa == 0.0) return out;
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double rho = ab / (na * nb);
  out.loss = 1.0 - rho;
  std::vector<double> gr(n);
  for (std::size_t i = 0; i < n; ++i) gr[i] = -(b[i] / (na * nb) - rho * a[i] / aa);
  auto gz = soft_rank_vjp(sr, gr, tau);
  if (!standardize) {
    out.grad = std::move(gz);
    return out;
  }
  double mg = 0.0, mgz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mg += gz[i];
    mgz += gz[i] * z[i];
  }
  mg /= static_cast<double>(n);
  mgz /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out.grad[i] = (gz[i] - mg - z[i] * mgz) / sd;
  return out;
}

std::vector<int> relevance_grades(const std::vector<double>& targets, int levels) {
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  std::vector<int> g(targets.size(), 0);
  if (targets.empty() || !(*hi > *lo)) return g;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double u = (targets[i] - *lo) / (*hi - *lo);
    g[i] = std::min(levels - 1, static_cast<int>(std::floor(u * levels)));
  }
  return g;
}

LossGrad lambdarank_loss(const std::vector<double>& scores, const std::vector<double>& targets) {
  const std::size_t n = scores.size();
  if (n < 2 || targets.size() != n) throw UsageError("LambdaRank: need >= 2 paired values");
  LossGrad out;
  out.grad.assign(n, 0.0);
  const auto grade = relevance_grades(targets);
  std::vector<double> gain(n);
  for (std::size_t i = 0; i < n; ++i) gain[i] = std::exp2(grade[i]) - 1.0;
  std::vector<double> ideal = gain;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t k = 0; k < n; ++k) idcg += ideal[k] / std::log2(static_cast<double>(k) + 2.0);
  const auto order = order_desc(scores);
  std::uint64_t sig = 0x1a;
  for (auto o : order) sig = mix(sig, o);
  out.signature = sig;
  if (idcg == 0.0) return out;
  std::vector<double> disc(n);
  for (std::size_t k = 0; k < n; ++k) disc[order[k]] = 1.0 / std::log2(static_cast<double>(k) + 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (grade[i] <= grade[j]) continue;
      const double w = std::fabs((gain[i] - gain[j]) * (disc[i] - disc[j])) / idcg;
      if (w == 0.0) continue;
      const double diff = scores[i] - scores[j];
      out.loss += w * softplus(-diff);
      const double lam = w * sigmoid(-diff);
      out.grad[i] -= lam;
      out.grad[j] += lam;
    }
  }
  return out;
}

LossGrad rank_loss(RankLossKind kind, const std::vector<double>& scores, const std::vector<double>& targets,
                   double tau) {
  switch (kind) {
    case RankLossKind::SoftSpearman: return soft_spearman_loss(scores, targets, tau);
    case RankLossKind::LambdaRank: return lambdarank_loss(scores, targets);
    case RankLossKind::Hybrid: {
      auto a = soft_spearman_loss(scores, targets, tau);
      const auto b = lambdarank_loss(scores, targets);
      a.loss += b.loss;
      for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += b.grad[i];
      a.signature = mix(a.signature, b.signature);
      return a;
    }
  }
  throw UsageError("unknown rank loss");
}

}  // namespace mixq::surrogate
