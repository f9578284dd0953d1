#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"
#include "mixq/surrogate/metrics.hpp"
#include "mixq/surrogate/rank_losses.hpp"

using namespace mixq;
using namespace mixq::surrogate;

namespace {

std::vector<double> randvec(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

template <class F>
void expect_fd_gradient(F f, const std::vector<double>& x, const LossGrad& at, double tol) {
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto lp = f(xp), lm = f(xm);
    // Only compare where no kink lies between the probes.
    if (lp.signature != at.signature || lm.signature != at.signature) continue;
    EXPECT_NEAR((lp.loss - lm.loss) / (2 * h), at.grad[i], tol) << "i=" << i;
  }
}

}  // namespace

TEST(SoftRank, SmallTauRecoversHardRanks) {
  const std::vector<double> x = {0.3, -1.0, 2.0, 0.9};
  const auto sr = soft_rank(x, 1e-3);
  const std::vector<double> want = {2, 1, 4, 3};
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(sr.ranks[i], want[i], 1e-9);
}

TEST(SoftRank, LargeTauCollapsesToMeanRank) {
  const auto sr = soft_rank({0.3, -1.0, 2.0, 0.9}, 1e6);
  for (double r : sr.ranks) EXPECT_NEAR(r, 2.5, 1e-5);
}

TEST(SoftRank, IsTheEuclideanProjectionOntoThePermutahedron) {
  CounterRng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(5);
    const auto x = randvec(rng, n);
    const double tau = 0.1 + rng.uniform() * 2;
    const auto r = soft_rank(x, tau).ranks;
    // Membership: majorized by (n, ..., 1).
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double ps = 0, pw = 0;
    for (std::size_t k = 0; k < n; ++k) {
      ps += sorted[k];
      pw += static_cast<double>(n - k);
      EXPECT_LE(ps, pw + 1e-9);
    }
    EXPECT_NEAR(ps, pw, 1e-9);
    // Optimality: <z - r, v - r> <= 0 for every vertex v.
    std::vector<double> perm(n);
    std::iota(perm.begin(), perm.end(), 1.0);
    do {
      double ip = 0;
      for (std::size_t i = 0; i < n; ++i) ip += (x[i] / tau - r[i]) * (perm[i] - r[i]);
      EXPECT_LE(ip, 1e-9);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(SoftRank, VjpMatchesFiniteDifferences) {
  CounterRng rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng.below(8);
    const auto x = randvec(rng, n);
    const double tau = 0.3;
    const auto g = randvec(rng, n);
    const auto sr = soft_rank(x, tau);
    const auto vjp = soft_rank_vjp(sr, g, tau);
    for (std::size_t i = 0; i < n; ++i) {
      auto xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      const auto rp = soft_rank(xp, tau), rm = soft_rank(xm, tau);
      if (rp.block_start != sr.block_start || rm.block_start != sr.block_start || rp.order != sr.order ||
          rm.order != sr.order)
        continue;
      double fd = 0;
      for (std::size_t j = 0; j < n; ++j) fd += g[j] * (rp.ranks[j] - rm.ranks[j]) / 2e-6;
      EXPECT_NEAR(fd, vjp[i], 1e-6);
    }
  }
}

TEST(SoftSpearman, ExtremesAndInvariances) {
  const std::vector<double> y = {1, 2, 3, 4, 5, 6};
  EXPECT_NEAR(soft_spearman_loss({10, 20, 30, 40, 50, 60}, y, 0.01).loss, 0.0, 1e-9);
  EXPECT_NEAR(soft_spearman_loss({6, 5, 4, 3, 2, 1}, y, 0.01).loss, 2.0, 1e-9);
  // Standardization makes the loss invariant to affine maps of the scores.
  const std::vector<double> s = {0.3, -0.1, 0.8, 0.2, 0.5, -0.4};
  std::vector<double> s2;
  for (double v : s) s2.push_back(7.0 * v + 3.0);
  EXPECT_NEAR(soft_spearman_loss(s, y).loss, soft_spearman_loss(s2, y).loss, 1e-12);
  // Only the ranks of the targets matter.
  std::vector<double> y2;
  for (double v : y) y2.push_back(std::exp(v));
  EXPECT_NEAR(soft_spearman_loss(s, y).loss, soft_spearman_loss(s, y2).loss, 1e-12);
}

TEST(SoftSpearman, DegenerateInputs) {
  EXPECT_THROW(soft_spearman_loss({1, 2, 3}, {1, 1, 1}), DataError);
  const auto c = soft_spearman_loss({2, 2, 2}, {1, 2, 3});
  EXPECT_EQ(c.loss, 1.0);
  for (double g : c.grad) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(soft_spearman_loss({1}, {1}), UsageError);
}

TEST(SoftSpearman, GradientMatchesFiniteDifferences) {
  CounterRng rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const auto s = randvec(rng, n), y = randvec(rng, n);
    const double tau = t % 2 ? 1.0 : 0.2;
    for (bool standardize : {true, false}) {
      auto f = [&](const std::vector<double>& v) { return soft_spearman_loss(v, y, tau, standardize); };
      expect_fd_gradient(f, s, f(s), 1e-6);
    }
  }
}

TEST(LambdaRank, GradientMatchesFiniteDifferences) {
  CounterRng rng(6);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const auto s = randvec(rng, n), y = randvec(rng, n);
    auto f = [&](const std::vector<double>& v) { return lambdarank_loss(v, y); };
    expect_fd_gradient(f, s, f(s), 1e-6);
  }
}

TEST(LambdaRank, LossRecomputedFromPairs) {
  const std::vector<double> s = {0.5, 2.0, -1.0}, y = {0.0, 1.0, 0.5};
  // Grades: 0, 15, 8. Order by score: 1, 0, 2.
  const double g[] = {0.0, 32767.0, 255.0};
  const double disc[] = {1.0 / std::log2(3.0), 1.0, 1.0 / std::log2(4.0)};
  const double idcg = 32767.0 + 255.0 / std::log2(3.0);
  auto term = [&](int i, int j) {
    const double w = std::fabs((g[i] - g[j]) * (disc[i] - disc[j])) / idcg;
    return w * std::log1p(std::exp(-(s[i] - s[j])));
  };
  EXPECT_NEAR(lambdarank_loss(s, y).loss, term(1, 0) + term(1, 2) + term(2, 0), 1e-12);
}

TEST(LambdaRank, BetterOrderingsCostLess) {
  CounterRng rng(7);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng.below(15);
    const auto y = randvec(rng, n);
    auto s = randvec(rng, n);
    // Swapping a misordered pair into the right order never increases the loss.
    const auto i = rng.below(n), j = rng.below(n);
    if (y[i] == y[j]) continue;
    const std::size_t hi = y[i] > y[j] ? i : j, lo = hi == i ? j : i;
    if (s[hi] >= s[lo]) std::swap(s[hi], s[lo]);
    const double before = lambdarank_loss(s, y).loss;
    std::swap(s[hi], s[lo]);
    EXPECT_LE(lambdarank_loss(s, y).loss, before + 1e-12);
  }
}

TEST(RankLoss, HybridIsTheSum) {
  const std::vector<double> s = {0.1, 0.7, -0.3, 0.2}, y = {3, 1, 2, 4};
  const auto a = soft_spearman_loss(s, y), b = lambdarank_loss(s, y), h = rank_loss(RankLossKind::Hybrid, s, y);
  EXPECT_NEAR(h.loss, a.loss + b.loss, 1e-15);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(h.grad[i], a.grad[i] + b.grad[i], 1e-15);
  EXPECT_EQ(parse_rank_loss("ndcg"), RankLossKind::LambdaRank);
  EXPECT_THROW(parse_rank_loss("mse"), UsageError);
}

TEST(Grades, SixteenLevels) {
  EXPECT_EQ(relevance_grades({0.0, 0.5, 1.0, 0.99, 0.0625}), (std::vector<int>{0, 8, 15, 15, 1}));
  EXPECT_EQ(relevance_grades({2.0, 2.0}), (std::vector<int>{0, 0}));
}

TEST(Metrics, SpearmanMatchesClosedFormWithoutTies) {
  CounterRng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng.below(30);
    const auto a = randvec(rng, n), b = randvec(rng, n);
    const auto ra = average_ranks(a), rb = average_ranks(b);
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double nn = static_cast<double>(n);
    EXPECT_NEAR(spearman(a, b), 1 - 6 * d2 / (nn * (nn * nn - 1)), 1e-12);
  }
  EXPECT_EQ(average_ranks({5, 1, 5, 3}), (std::vector<double>{3.5, 1, 3.5, 2}));
  EXPECT_EQ(pearson({1, 1, 1}, {1, 2, 3}), 0.0);
}

TEST(Metrics, NdcgHandCase) {
  // Grades 0, 15, 8; the list puts the 8 first and the 15 second.
  const std::vector<double> y = {0.0, 1.0, 0.5}, s = {0.0, 1.0, 2.0};
  const double dcg = 255.0 + 32767.0 / std::log2(3.0);
  const double idcg = 32767.0 + 255.0 / std::log2(3.0);
  EXPECT_NEAR(ndcg_at_k(s, y, 10), dcg / idcg, 1e-12);
  EXPECT_NEAR(ndcg_at_k(s, y, 1), 255.0 / 32767.0, 1e-12);
  EXPECT_EQ(ndcg_at_k({1, 2, 3}, {4, 4, 4}), 1.0);
  EXPECT_NEAR(ndcg_at_k(y, y), 1.0, 1e-15);
}

TEST(Metrics, NdcgBoundedAndPerfectForMonotoneScores) {
  CounterRng rng(9);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(40);
    const auto s = randvec(rng, n), y = randvec(rng, n);
    const double v = ndcg_at_k(s, y);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
    std::vector<double> m;
    for (double x : y) m.push_back(std::atan(x));
    EXPECT_NEAR(ndcg_at_k(m, y), 1.0, 1e-12);
  }
}
