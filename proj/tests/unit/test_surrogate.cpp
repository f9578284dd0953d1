#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "mixq/core/errors.hpp"
#include "mixq/surrogate/grad_check.hpp"
#include "mixq/surrogate/metrics.hpp"
#include "mixq/surrogate/train.hpp"
#include "support/random_graphs.hpp"
#include "support/synthetic.hpp"

using namespace mixq;
using namespace mixq::surrogate;

namespace {

SurrogateDims small_dims() {
  SurrogateDims d;
  d.hidden = 16;
  d.layers = 3;
  d.method_dim = 4;
  d.bits_dim = 2;
  d.op_dim = 4;
  d.block_dim = 4;
  d.scalar_dim = 4;
  d.head_mid = 8;
  return d;
}

int vocab() { return static_cast<int>(graph::op_type_vocabulary().size()); }

// Params whose running statistics are not the identity, so eval-mode BN is
// exercised non-trivially.
SurrogateParams warmed_params(const SurrogateDims& d, const std::vector<GraphSample>& s, std::uint64_t seed) {
  auto p = init_params(d, vocab(), seed);
  ForwardCache c;
  forward(p, make_batch(s), Mode::Train, c);
  update_running_stats(p, c);
  return p;
}

}  // namespace

TEST(Batch, PacksGraphsDisjointly) {
  const auto s = mixq::testing::random_samples(9, 2, 3, 1);
  const auto b = make_batch(s, {2, 0});
  const std::size_t n = s[0].graph->size();
  EXPECT_EQ(b.graphs, 2u);
  EXPECT_EQ(b.nodes, 2 * n);
  EXPECT_EQ(b.y, (std::vector<double>{s[2].y, s[0].y}));
  for (std::size_t v = 0; v < b.nodes; ++v) {
    EXPECT_EQ(b.graph_of[v], v / n);
    // Self-loop first, then predecessors within the same graph.
    EXPECT_EQ(b.in_src[b.in_ptr[v]], v);
    for (auto k = b.in_ptr[v] + 1; k < b.in_ptr[v + 1]; ++k) EXPECT_EQ(b.graph_of[b.in_src[k]], b.graph_of[v]);
  }
  EXPECT_EQ(b.edges(), 2 * (n + s[0].graph->edges().size()));
  for (std::size_t m = 0; m < b.hop_ptr.size(); ++m) EXPECT_EQ(b.hop_ptr[m].size(), 3u);
  EXPECT_EQ(b.method[n + 1], s[0].features[1].method);
}

TEST(Params, InitIsDeterministicAndBounded) {
  const auto d = small_dims();
  const auto a = init_params(d, vocab(), 5), b = init_params(d, vocab(), 5), c = init_params(d, vocab(), 6);
  ASSERT_EQ(a.tensors.size(), b.tensors.size());
  for (std::size_t t = 0; t < a.tensors.size(); ++t) EXPECT_EQ(a.tensors[t].v, b.tensors[t].v);
  EXPECT_NE(a.tensors[slot::kFuseW].v, c.tensors[slot::kFuseW].v);
  const auto& w = a.tensors[slot::kFuseW];
  for (double x : w.v) EXPECT_LE(std::fabs(x), 1.0 / std::sqrt(static_cast<double>(w.rows)) + 1e-15);
  for (double x : a.tensors[slot::kBn0Gamma].v) EXPECT_EQ(x, 1.0);
  std::size_t total = 0;
  for (const auto& t : a.tensors) total += t.size();
  EXPECT_EQ(a.parameter_count(), total);
}

TEST(Forward, EvalPredictionsDoNotDependOnBatching) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(12, d.layers, 6, 2);
  const auto p = warmed_params(d, s, 1);
  ForwardCache all;
  forward(p, make_batch(s), Mode::Eval, all);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ForwardCache one;
    forward(p, make_batch(s, {i}), Mode::Eval, one);
    EXPECT_NEAR(one.pred[0], all.pred[i], 1e-12);
    for (std::size_t m = 0; m < all.hop_norm.size(); ++m)
      if (!all.hop_norm[m].empty()) EXPECT_NEAR(one.hop_norm[m][0], all.hop_norm[m][i], 1e-12);
  }
}

TEST(Forward, TrainModeIsPermutationEquivariant) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(12, d.layers, 5, 3);
  const auto p = init_params(d, vocab(), 2);
  ForwardCache a, b;
  forward(p, make_batch(s, {0, 1, 2, 3, 4}), Mode::Train, a);
  forward(p, make_batch(s, {3, 1, 4, 0, 2}), Mode::Train, b);
  const std::size_t perm[] = {3, 1, 4, 0, 2};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(b.pred[k], a.pred[perm[k]], 1e-10);
}

TEST(Forward, HopEmbeddingsOnlySeeTheirNeighborhood) {
  // In eval mode h^m(v) is a function of the features in N^m(v) alone.
  const auto d = small_dims();
  CounterRng rng(4);
  for (int t = 0; t < 5; ++t) {
    auto s = mixq::testing::random_samples(14, d.layers, 1, 10 + t);
    const auto p = warmed_params(d, mixq::testing::random_samples(14, d.layers, 4, 10 + t), 3);
    const auto& g = *s[0].graph;
    ForwardCache base;
    forward(p, make_batch(s), Mode::Eval, base);
    for (std::size_t u = 0; u < g.size(); ++u) {
      auto changed = s;
      auto& f = changed[0].features[u];
      f.epsilon += 0.7;
      f.size_ratio += 0.3;
      f.op_type = (f.op_type + 1) % vocab();
      ForwardCache c;
      forward(p, make_batch(changed), Mode::Eval, c);
      for (std::size_t v = 0; v < g.size(); ++v)
        for (int m = 0; m <= d.layers; ++m) {
          const auto nb = graph::m_hop_neighborhood(g, v, m);
          const bool inside = std::binary_search(nb.begin(), nb.end(), u);
          const double before = node_norm(base, v, m, d.hidden), after = node_norm(c, v, m, d.hidden);
          if (!inside) EXPECT_EQ(before, after) << "u=" << u << " v=" << v << " m=" << m;
        }
    }
  }
}

TEST(Forward, PartialPassMatchesFullPass) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(12, d.layers, 3, 5);
  const auto p = warmed_params(d, s, 4);
  ForwardCache full, part;
  forward(p, make_batch(s), Mode::Eval, full);
  forward(p, make_batch(s), Mode::Eval, part, 1);
  EXPECT_EQ(part.layers_run, 1);
  EXPECT_TRUE(part.pred.empty());
  for (std::size_t v = 0; v < full.h[1].size(); ++v) EXPECT_EQ(part.h[1][v], full.h[1][v]);
}

class GradCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradCheck, AnalyticGradientMatchesCentralDifferences) {
  const auto d = small_dims();
  const int kind = GetParam();
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const auto s = mixq::testing::random_samples(10, d.layers, 4, 40 + seed);
    std::vector<double> y;
    for (const auto& x : s) y.push_back(x.y);
    const auto p = warmed_params(d, s, seed);
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      GradCheckSpec gs;
      gs.mode = mode;
      gs.use_rank = kind >= 0;
      if (kind >= 0) gs.rank_loss = static_cast<RankLossKind>(kind);
      const auto r = grad_check(p, make_batch(s), y, gs);
      EXPECT_LT(r.max_rel_error, 1e-5) << "seed " << seed;
      std::size_t checked = 0;
      for (const auto& t : r.tensors) checked += t.checked;
      EXPECT_EQ(checked + r.skipped, p.parameter_count());
      EXPECT_GT(checked, p.parameter_count() / 2);
    }
  }
}

std::string loss_name(const ::testing::TestParamInfo<int>& info) {
  static const char* names[] = {"mse", "srcc", "ndcg", "hybrid"};
  return names[info.param + 1];
}

INSTANTIATE_TEST_SUITE_P(Losses, GradCheck, ::testing::Values(-1, 0, 1, 2), loss_name);

TEST(CompositeLoss, SkipsRankingForASingleGraphOrConstantTargets) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(10, d.layers, 3, 6);
  const auto p = init_params(d, vocab(), 0);
  ForwardCache c;
  std::vector<double> dpred;
  std::vector<std::vector<double>> dhop;
  forward(p, make_batch(s, {0}), Mode::Eval, c);
  auto L = composite_loss(c, {0.5}, {0}, RankLossKind::Hybrid, 1.0, dpred, dhop);
  EXPECT_TRUE(L.rank_skipped);
  EXPECT_DOUBLE_EQ(L.total, L.orig);
  EXPECT_NEAR(L.orig, (c.pred[0] - 0.5) * (c.pred[0] - 0.5), 1e-15);
  forward(p, make_batch(s), Mode::Train, c);
  L = composite_loss(c, {1.0, 1.0, 1.0}, {0}, RankLossKind::Hybrid, 1.0, dpred, dhop);
  EXPECT_TRUE(L.rank_skipped);
  L = composite_loss(c, {1.0, 2.0, 0.0}, {0}, RankLossKind::Hybrid, 1.0, dpred, dhop);
  EXPECT_FALSE(L.rank_skipped);
  ASSERT_EQ(L.rank.size(), 1u);
  EXPECT_NEAR(L.total, L.orig + L.rank[0], 1e-15);
}

TEST(Train, DeterministicInSeedAndLogsCosineSchedule) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(10, d.layers, 20, 7);
  TrainSpec spec;
  spec.dims = d;
  spec.epochs = 4;
  spec.batch_size = 8;
  spec.seed = 3;
  const auto a = train(s, spec), b = train(s, spec);
  for (std::size_t t = 0; t < a.params.tensors.size(); ++t) EXPECT_EQ(a.params.tensors[t].v, b.params.tensors[t].v);
  ASSERT_EQ(a.log.size(), 4u);
  for (int e = 0; e < 4; ++e)
    EXPECT_NEAR(a.log[e].lr, 0.5 * spec.lr * (1 + std::cos(std::numbers::pi * e / 4.0)), 1e-18);
  spec.seed = 4;
  const auto c = train(s, spec);
  EXPECT_NE(a.params.tensors[slot::kFuseW].v, c.params.tensors[slot::kFuseW].v);
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(10, d.layers, 5, 8);
  TrainSpec spec;
  spec.dims = d;
  spec.epochs = 0;
  spec.seed = 9;
  const auto r = train(s, spec);
  const auto p = init_params(d, vocab(), 9);
  for (std::size_t t = 0; t < p.tensors.size(); ++t) EXPECT_EQ(r.params.tensors[t].v, p.tensors[t].v);
  EXPECT_TRUE(r.log.empty());
  double mean = 0;
  for (const auto& x : s) mean += x.y / 5.0;
  EXPECT_NEAR(r.scaler.mean, mean, 1e-12);
}

TEST(Train, ValidatesArguments) {
  const auto d = small_dims();
  const auto s = mixq::testing::random_samples(10, d.layers, 5, 8);
  TrainSpec spec;
  spec.dims = d;
  spec.epochs = 1;
  EXPECT_THROW(train({}, spec), DataError);
  spec.lr = 0;
  EXPECT_THROW(train(s, spec), UsageError);
  spec.lr = 1e-3;
  spec.active_hops = {7};
  EXPECT_THROW(train(s, spec), UsageError);
  spec.active_hops = {};
  spec.dims.layers = 2;
  EXPECT_THROW(train(s, spec), UsageError);
}

TEST(Train, DivergenceIsANumericError) {
  const auto d = small_dims();
  auto s = mixq::testing::random_samples(10, d.layers, 6, 8);
  s[2].y = 1e308;
  s[3].y = -1e308;
  TrainSpec spec;
  spec.dims = d;
  spec.epochs = 2;
  EXPECT_THROW(train(s, spec), NumericError);
  s[2].y = 0.1;
  s[3].y = 0.2;
  spec.lr = 1e300;
  EXPECT_THROW(train(s, spec), NumericError);
}

TEST(Train, LearnsARealizableLinearTarget) {
  const auto d = small_dims();
  auto s = mixq::testing::random_samples(14, d.layers, 240, 21);
  mixq::testing::LinearTarget(5).relabel(s);
  const std::vector<GraphSample> tr(s.begin(), s.begin() + 200), va(s.begin() + 200, s.end());
  TrainSpec spec;
  spec.dims = d;
  spec.epochs = 150;
  spec.batch_size = 32;
  spec.lr = 3e-3;
  spec.rank_loss = RankLossKind::SoftSpearman;
  const auto r = train(tr, spec);
  const auto inf = infer(r.params, r.scaler, va);
  std::vector<double> y;
  for (const auto& x : va) y.push_back(x.y);
  EXPECT_GE(spearman(inf.pred, y), 0.9);
  EXPECT_LT(r.log.back().orig, r.log.front().orig);
}
