#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"
#include "mixq/quant/quant.hpp"

using namespace mixq;
using namespace mixq::quant;

namespace {

// Optimal k-clustering SSE by trying every labelling of the values
// (k^n assignments); independent of any sortedness argument.
double brute_force_sse(const std::vector<double>& x, int k) {
  const std::size_t n = x.size();
  std::vector<int> lab(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> sum(k, 0.0), cnt(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[lab[i]] += x[i];
      cnt[lab[i]] += 1;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = sum[lab[i]] / cnt[lab[i]];
      sse += (x[i] - c) * (x[i] - c);
    }
    best = std::min(best, sse);
    std::size_t p = 0;
    while (p < n && ++lab[p] == k) lab[p++] = 0;
    if (p == n) break;
  }
  return best;
}

std::vector<double> random_values(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * std::exp(rng.normal());
  return v;
}

}  // namespace

TEST(UaqScale, HandComputedCases) {
  const std::vector<double> w = {-1.0, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(uaq_scale(w, 3, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(uaq_scale(w, 3, 50), 1.0 / 6.0);
  const std::vector<double> z = {0.0, 0.0, 0.0};
  EXPECT_EQ(uaq_scale(z, 4, 0), 0.0);
}

TEST(UaqQuantize, CodesMatchDirectRoundingAndClamp) {
  WeightTensor w({0.4, 10.0, -10.0}, 1, 3);
  const std::vector<double> scale = {1.0 / 3.0};
  const auto q = uaq_quantize(w, scale, 3);
  EXPECT_EQ(q.codes, (std::vector<std::int32_t>{1, 3, -3}));
  q.validate();
}

TEST(UaqQuantize, AllZeroChannelUsesZeroScaleSentinel) {
  WeightTensor w({0, 0, 0, 1, -2, 0.5}, 2, 3);
  const auto q = quantize(w, QuantMethod::UAQ, 4);
  ASSERT_EQ(q.scales.size(), 2u);
  EXPECT_EQ(q.scales[0], 0.0);
  EXPECT_GT(q.scales[1], 0.0);
  const auto dq = dequantize(q);
  EXPECT_EQ(dq[0], 0.0);
  EXPECT_EQ(dq[1], 0.0);
  EXPECT_EQ(dq[2], 0.0);
}

TEST(UaqQuantize, AlphaZeroErrorBoundedByHalfStep) {
  CounterRng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(20);
    WeightTensor w(random_values(rng, rows * cols), rows, cols);
    const int nq = 3 + static_cast<int>(rng.below(2));
    const auto scales = uaq_scales(w, nq, 0);
    const auto dq = dequantize(uaq_quantize(w, scales, nq));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        EXPECT_LE(std::fabs(w.values()[r * cols + c] - dq[r * cols + c]), scales[r] / 2 + 1e-12);
  }
}

TEST(UaqAlphaSearch, GridPointsPreferAlphaZero) {
  // Values on the alpha = 0 grid of a channel with max 1, n_q = 3.
  WeightTensor w({-1.0, -2.0 / 3, -1.0 / 3, 0.0, 1.0 / 3, 2.0 / 3, 1.0}, 1, 7);
  const auto s = uaq_search_alpha(w, 3);
  EXPECT_EQ(s.alpha, 0);
  EXPECT_NEAR(s.loss, 0.0, 1e-15);
}

TEST(UaqAlphaSearch, OutlierMakesShrinkingWorthwhile) {
  std::vector<double> v(100, 1.2);
  v.push_back(10.0);
  WeightTensor w(v, 1, v.size());
  const auto s = uaq_search_alpha(w, 3, 2.0);
  EXPECT_GT(s.alpha, 0);
  EXPECT_LT(s.loss, s.grid_losses[0]);
  // Independent recomputation of every grid loss.
  for (std::size_t i = 0; i < kAlphaGrid.size(); ++i) {
    const double delta = 10.0 * (1.0 - 0.01 * kAlphaGrid[i]) / 3.0;
    double sse = 0.0;
    for (double x : v) {
      const double code = std::clamp(std::nearbyint(x / delta), -3.0, 3.0);
      sse += (x - code * delta) * (x - code * delta);
    }
    EXPECT_NEAR(s.grid_losses[i], std::sqrt(sse), 1e-12);
  }
}

TEST(UaqAlphaSearch, ReportedLossMatchesRecomputationAndNeverExceedsAlphaZero) {
  CounterRng rng(22);
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 1 + rng.below(3), cols = 2 + rng.below(30);
    WeightTensor w(random_values(rng, rows * cols), rows, cols);
    const double p = t % 2 ? 2.0 : 4.0;
    const auto s = uaq_search_alpha(w, 3, p);
    const auto dq = dequantize(uaq_quantize(w, uaq_scales(w, 3, s.alpha), 3));
    EXPECT_NEAR(s.loss, quant_error(w.values(), dq, p), 1e-12 * (1 + s.loss));
    EXPECT_LE(s.loss, s.grid_losses[0]);
  }
}

TEST(KMeans, FewerDistinctValuesThanClustersIsExact) {
  WeightTensor w({1, 1, 2, 2}, 1, 4);
  const auto q = kmeans_quantize(w, 3, KMeansMode::WholeTensor);
  q.validate();
  ASSERT_EQ(q.codebooks.size(), 1u);
  EXPECT_EQ(q.codebooks[0].size(), 8u);
  EXPECT_NE(std::find(q.codebooks[0].begin(), q.codebooks[0].end(), 1.0), q.codebooks[0].end());
  EXPECT_NE(std::find(q.codebooks[0].begin(), q.codebooks[0].end(), 2.0), q.codebooks[0].end());
  const auto dq = dequantize(q);
  EXPECT_EQ(quant_error(w.values(), dq), 0.0);
}

TEST(KMeans, TwoExactClusters) {
  const std::vector<double> x = {0, 0, 0, 10, 10, 10};
  const auto c = kmeans_1d_exact(x, 2);
  EXPECT_EQ(c.centroids, (std::vector<double>{0.0, 10.0}));
  EXPECT_EQ(c.sse, 0.0);
}

TEST(KMeans, ExactSolverMatchesExhaustiveLabelling) {
  CounterRng rng(23);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 2 + rng.below(7);
    const auto x = random_values(rng, n);
    for (int k : {2, 3}) {
      const auto c = kmeans_1d_exact(x, k);
      EXPECT_NEAR(c.sse, brute_force_sse(x, k), 1e-9) << "n=" << n << " k=" << k;
    }
  }
}

TEST(KMeans, LloydIsNeverBetterThanExact) {
  CounterRng rng(24);
  for (int t = 0; t < 40; ++t) {
    const auto x = random_values(rng, 5 + rng.below(40));
    for (int k : {2, 8}) {
      const auto e = kmeans_1d_exact(x, k);
      const auto l = kmeans_1d_lloyd(x, k, {KMeansSolver::Lloyd, 3, 100, 1e-8, 7});
      EXPECT_GE(l.sse, e.sse - 1e-9);
    }
  }
}

TEST(KMeans, PerChannelNeverWorseThanWholeTensor) {
  CounterRng rng(25);
  for (int t = 0; t < 40; ++t) {
    const std::size_t rows = 1 + rng.below(4), cols = 3 + rng.below(12);
    WeightTensor w(random_values(rng, rows * cols), rows, cols);
    const auto c = dequantize(kmeans_quantize(w, 3, KMeansMode::PerChannel));
    const auto a = dequantize(kmeans_quantize(w, 3, KMeansMode::WholeTensor));
    EXPECT_LE(quant_error(w.values(), c), quant_error(w.values(), a) + 1e-12);
  }
}

TEST(KMeans, MoreClustersNeverHurt) {
  CounterRng rng(26);
  for (int t = 0; t < 30; ++t) {
    const auto x = random_values(rng, 4 + rng.below(9));
    EXPECT_LE(kmeans_1d_exact(x, 16).sse, kmeans_1d_exact(x, 8).sse + 1e-12);
  }
}

TEST(Dequantize, HandBuiltTensors) {
  QuantizedTensor u;
  u.method = QuantMethod::UAQ;
  u.n_q = 3;
  u.rows = 1;
  u.cols = 1;
  u.codes = {3};
  u.scales = {1.0 / 3.0};
  EXPECT_DOUBLE_EQ(dequantize(u)[0], 1.0);

  QuantizedTensor k;
  k.method = QuantMethod::KMeansA;
  k.n_q = 1;
  k.rows = 1;
  k.cols = 2;
  k.codes = {0, 1};
  k.codebooks = {{-2.5, 4.0}};
  EXPECT_EQ(dequantize(k), (std::vector<double>{-2.5, 4.0}));
}

TEST(QuantError, Examples) {
  const std::vector<double> a = {3, 4}, z = {0, 0};
  EXPECT_DOUBLE_EQ(quant_error(a, a), 0.0);
  EXPECT_DOUBLE_EQ(quant_error(a, z), 5.0);
  CounterRng rng(27);
  const auto x = random_values(rng, 37), y = random_values(rng, 37);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::pow(std::fabs(x[i] - y[i]), 4.0);
  EXPECT_NEAR(quant_error(x, y, 4.0), std::pow(s, 0.25), 1e-12);
}

TEST(BitCost, HandComputedCases) {
  CounterRng rng(28);
  WeightTensor w16(random_values(rng, 16), 4, 4, 16);
  EXPECT_EQ(bit_cost(kmeans_quantize(w16, 3, KMeansMode::WholeTensor), 16), 176u);
  EXPECT_EQ(bit_cost(quantize(w16, QuantMethod::UAQ, 4), 16), 128u);
  // Per-channel codebooks: 16*3 + 16*8*4.
  EXPECT_EQ(bit_cost(kmeans_quantize(w16, 3, KMeansMode::PerChannel), 16), 16u * 3 + 16u * 8 * 4);
  const auto o = quantize_and_measure(w16, QuantMethod::KMeansA, 3);
  EXPECT_DOUBLE_EQ(o.size_ratio, 176.0 / 256.0);
}

TEST(BitCost, NoCompressionWhenCodeWidthMatchesStorage) {
  CounterRng rng(29);
  WeightTensor w(random_values(rng, 8), 1, 8, 16);
  EXPECT_GE(bit_cost(quantize(w, QuantMethod::UAQ, 16), 16), 8u * 16);
}

TEST(Quantize, FuzzedRoundTripsAreValidAndFinite) {
  CounterRng rng(30);
  for (int t = 0; t < 60; ++t) {
    const std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(20);
    WeightTensor w(random_values(rng, rows * cols), rows, cols);
    for (auto m : kMethods)
      for (int nq : kBitChoices) {
        const auto q = quantize(w, m, nq);
        q.validate();
        const auto dq = dequantize(q);
        ASSERT_EQ(dq.size(), w.size());
        for (double v : dq) EXPECT_TRUE(std::isfinite(v));
      }
  }
}

TEST(Quantize, MethodNamesAndRejections) {
  EXPECT_EQ(parse_method("kmeans_c"), QuantMethod::KMeansC);
  EXPECT_EQ(parse_method("kmeans_a"), QuantMethod::KMeansA);
  EXPECT_EQ(parse_method("uaq"), QuantMethod::UAQ);
  EXPECT_THROW(parse_method("uaq_asym"), UsageError);
  EXPECT_THROW(parse_method("gptq"), UsageError);
  EXPECT_THROW(WeightTensor({1.0, std::nan("")}, 1, 2), DataError);
  EXPECT_THROW(WeightTensor({1.0, 2.0}, 1, 3), DataError);
}
