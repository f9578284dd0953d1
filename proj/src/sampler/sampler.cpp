#include "mixq/sampler/sampler.hpp"

#include <unordered_set>

#include "mixq/core/errors.hpp"
#include "mixq/core/parallel.hpp"

namespace mixq::sampler {

SampledConfig sample_config(const graph::NetGraph& g, CounterRng& rng, std::optional<double> forced_p) {
  SampledConfig out;
  out.p = forced_p ? *forced_p : rng.uniform();
  if (!(out.p >= 0.0 && out.p <= 1.0)) throw UsageError("Bernoulli p must be in [0, 1]");
  out.config.choices.resize(g.weight_nodes().size());
  for (auto& c : out.config.choices) {
    c.bits = rng.uniform() < out.p ? 3 : 4;
    c.method = quant::kMethods[rng.below(quant::kMethods.size())];
  }
  return out;
}

std::vector<SampledConfig> sample_corpus(const graph::NetGraph& g, const SampleSpec& spec) {
  if (spec.n_configs < 1) throw UsageError("n_configs must be >= 1");
  const auto space = graph::search_space_size(g);
  if (space < spec.n_configs)
    throw UsageError("n_configs = " + std::to_string(spec.n_configs) + " exceeds the " + space.str() +
                     " distinct configurations of this graph; use a smaller n_configs");

  const CounterRng root(spec.seed);
  auto draw = [&](std::size_t i, std::uint64_t attempt) {
    CounterRng rng = root.substream(i);
    if (attempt > 0) rng = rng.substream(attempt);
    return sample_config(g, rng, spec.forced_p);
  };

  std::vector<SampledConfig> out(spec.n_configs);
  parallel_for(spec.n_configs, [&](std::size_t i) { out[i] = draw(i, 0); });

  // Deduplicate in index order so the result is independent of scheduling.
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t attempt = 0;
    while (!seen.insert(out[i].config.key()).second) {
      if (++attempt > static_cast<std::uint64_t>(spec.max_retries))
        throw UsageError("could not find " + std::to_string(spec.n_configs) +
                         " distinct configurations; use a smaller n_configs");
      out[i] = draw(i, attempt);
    }
  }
  return out;
}

}  // namespace mixq::sampler
