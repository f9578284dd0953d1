#pragma once

// Random quantization configurations for the surrogate's training corpus.
//
// Each configuration draws a Bernoulli probability p ~ U[0, 1]; every weight
// node then independently gets 3 bits with probability p (else 4) and a
// uniformly chosen method.

#include <cstdint>
#include <optional>
#include <vector>

#include "mixq/core/rng.hpp"
#include "mixq/graph/annotate.hpp"

namespace mixq::sampler {

struct SampleSpec {
  std::size_t n_configs = 400;
  std::uint64_t seed = 0;
  // Resampling attempts per index before giving up on deduplication.
  int max_retries = 1000;
  // Fixes p for every config instead of drawing it (testing hook).
  std::optional<double> forced_p;
};

struct SampledConfig {
  graph::QuantConfig config;
  double p = 0.0;
};

SampledConfig sample_config(const graph::NetGraph& g, CounterRng& rng, std::optional<double> forced_p = {});

// n_configs distinct configurations in index order. Index i draws from
// substream i of the seed (attempt a > 0 from a further substream), so the
// result does not depend on the worker count.
std::vector<SampledConfig> sample_corpus(const graph::NetGraph& g, const SampleSpec& spec);

}  // namespace mixq::sampler
