#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mixq/core/errors.hpp"
#include "mixq/graph/families.hpp"
#include "mixq/sampler/sampler.hpp"

using namespace mixq;

namespace {

// Kolmogorov-Smirnov statistic against U[0, 1].
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  return d;
}

// 1% critical value of the one-sample KS test.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

}  // namespace

TEST(Sampler, DeterministicAndDistinct) {
  const auto b = graph::build_graph("toy-dit", {2, 16});
  sampler::SampleSpec spec;
  spec.n_configs = 300;
  spec.seed = 9;
  const auto a = sampler::sample_corpus(b.graph, spec);
  const auto c = sampler::sample_corpus(b.graph, spec);
  ASSERT_EQ(a.size(), 300u);
  std::set<std::string> keys;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].config, c[i].config);
    EXPECT_EQ(a[i].config.choices.size(), b.graph.weight_nodes().size());
    keys.insert(a[i].config.key());
  }
  EXPECT_EQ(keys.size(), a.size());
  spec.seed = 10;
  EXPECT_NE(sampler::sample_corpus(b.graph, spec)[0].config, a[0].config);
}

TEST(Sampler, PrefixIsStableWhenCorpusGrows) {
  const auto b = graph::build_graph("toy-unet", {2, 16});
  sampler::SampleSpec spec;
  spec.n_configs = 50;
  const auto small = sampler::sample_corpus(b.graph, spec);
  spec.n_configs = 120;
  const auto big = sampler::sample_corpus(b.graph, spec);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].config, big[i].config);
}

TEST(Sampler, BernoulliProbabilityIsUniform) {
  const auto b = graph::build_graph("toy-dit", {1, 16});
  sampler::SampleSpec spec;
  spec.n_configs = 2000;
  spec.seed = 4;
  std::vector<double> p;
  for (const auto& s : sampler::sample_corpus(b.graph, spec)) p.push_back(s.p);
  EXPECT_LT(ks_uniform(p), ks_critical(p.size()));
}

TEST(Sampler, ThreeBitCountIsUniformUnderRandomizedPit) {
  // With p ~ U[0, 1] the number k of 3-bit layers is uniform on {0..W};
  // (k + V) / (W + 1) with V ~ U[0, 1) is then exactly U[0, 1].
  const auto b = graph::build_graph("toy-dit", {1, 16});
  const std::size_t W = b.graph.weight_nodes().size();
  sampler::SampleSpec spec;
  spec.n_configs = 3000;
  spec.seed = 5;
  CounterRng jitter(77);
  std::vector<double> u;
  for (const auto& s : sampler::sample_corpus(b.graph, spec)) {
    std::size_t k = 0;
    for (const auto& c : s.config.choices) k += c.bits == 3;
    u.push_back((static_cast<double>(k) + jitter.uniform()) / static_cast<double>(W + 1));
  }
  EXPECT_LT(ks_uniform(u), ks_critical(u.size()));
}

TEST(Sampler, MethodsAreUniform) {
  const auto b = graph::build_graph("toy-dit", {2, 16});
  sampler::SampleSpec spec;
  spec.n_configs = 500;
  std::array<double, 3> count{};
  double total = 0;
  for (const auto& s : sampler::sample_corpus(b.graph, spec))
    for (const auto& c : s.config.choices) {
      count[static_cast<int>(c.method)] += 1;
      total += 1;
    }
  double chi2 = 0.0;
  for (double c : count) chi2 += (c - total / 3) * (c - total / 3) / (total / 3);
  // 0.1% critical value for 2 degrees of freedom.
  EXPECT_LT(chi2, 13.82);
}

TEST(Sampler, ForcedProbabilityExtremes) {
  const auto b = graph::build_graph("toy-dit", {1, 16});
  CounterRng rng(1);
  for (const auto& c : sampler::sample_config(b.graph, rng, 1.0).config.choices) EXPECT_EQ(c.bits, 3);
  for (const auto& c : sampler::sample_config(b.graph, rng, 0.0).config.choices) EXPECT_EQ(c.bits, 4);
  EXPECT_THROW(sampler::sample_config(b.graph, rng, 1.5), UsageError);
}

TEST(Sampler, RejectsRequestsBeyondTheSearchSpace) {
  graph::NetGraph g("test");
  graph::OpNode x;
  x.id = "x";
  x.out_dim = 2;
  x.compute = graph::Compute::Input;
  x.op_type = "input";
  g.add_node(x);
  graph::OpNode w;
  w.id = "w";
  w.kind = graph::NodeKind::Weight;
  w.compute = graph::Compute::Linear;
  w.op_type = "ff_1";
  w.out_dim = 2;
  w.weight_ref = "w";
  g.add_node(w);
  g.add_edge("x", "w");
  g.finalize();
  sampler::SampleSpec spec;
  spec.n_configs = 6;
  const auto all = sampler::sample_corpus(g, spec);
  std::set<int> seen;
  for (const auto& s : all) seen.insert(s.config.choices[0].index());
  EXPECT_EQ(seen.size(), 6u);
  spec.n_configs = 7;
  EXPECT_THROW(sampler::sample_corpus(g, spec), UsageError);
  spec.n_configs = 0;
  EXPECT_THROW(sampler::sample_corpus(g, spec), UsageError);
}
