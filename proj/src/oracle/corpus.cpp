#include "mixq/oracle/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "mixq/core/errors.hpp"
#include "mixq/core/parallel.hpp"

namespace mixq::oracle {

std::string_view to_string(TargetMode m) { return m == TargetMode::Pure ? "pure" : "constrained"; }

TargetMode parse_target_mode(std::string_view s) {
  if (s == "pure") return TargetMode::Pure;
  if (s == "constrained") return TargetMode::Constrained;
  throw UsageError("unknown mode '" + std::string(s) + "' (expected pure or constrained)");
}

double target_value(double oracle_loss, double avg_bits, double lambda, TargetMode mode) {
  return mode == TargetMode::Constrained ? -oracle_loss - lambda * avg_bits : -oracle_loss;
}

ConfigRecord evaluate_config(const ToyModel& model, const graph::QuantConfig& config, double lambda,
                             TargetMode mode) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and >= 0");
  const auto ag = graph::apply_config(model.graph, config, model.table);
  ConfigRecord r;
  r.config = config;
  r.oracle_loss = model.config_loss(config);
  r.avg_bits = graph::average_bits(ag, false);
  r.avg_bits_overhead = graph::average_bits(ag, true);
  r.lambda = lambda;
  r.mode = mode;
  r.seed = model.seed;
  r.epsilons.reserve(config.choices.size());
  for (auto v : model.graph->weight_nodes()) r.epsilons.push_back(ag.features[v].epsilon);
  r.failed = !std::isfinite(r.oracle_loss);
  r.y = r.failed ? 0.0 : target_value(r.oracle_loss, r.avg_bits, lambda, mode);
  return r;
}

double auto_lambda(const std::vector<ConfigRecord>& records) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : records) {
    if (r.failed) continue;
    lo = std::min(lo, r.oracle_loss);
    hi = std::max(hi, r.oracle_loss);
  }
  if (!(hi >= lo)) throw DataError("auto lambda: no valid records");
  return 0.25 * (hi - lo);
}

void retarget(std::vector<ConfigRecord>& records, double lambda, TargetMode mode) {
  for (auto& r : records) {
    r.lambda = lambda;
    r.mode = mode;
    if (!r.failed) r.y = target_value(r.oracle_loss, r.avg_bits, lambda, mode);
  }
}

std::vector<ConfigRecord> generate_corpus(const ToyModel& model, const sampler::SampleSpec& spec,
                                          std::optional<double> lambda, TargetMode mode) {
  const auto configs = sampler::sample_corpus(*model.graph, spec);
  std::vector<ConfigRecord> out(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) {
    out[i] = evaluate_config(model, configs[i].config, lambda.value_or(0.0), mode);
    out[i].timestamp = i;
  });
  std::size_t failed = 0;
  for (const auto& r : out) failed += r.failed;
  if (failed) std::cerr << "warning: " << failed << " configurations produced a non-finite loss\n";
  if (!lambda) retarget(out, auto_lambda(out), mode);
  return out;
}

}  // namespace mixq::oracle
