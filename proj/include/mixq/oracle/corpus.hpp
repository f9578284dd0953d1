#pragma once

// Oracle evaluation of quantization configurations and corpus generation.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mixq/oracle/toy_model.hpp"
#include "mixq/sampler/sampler.hpp"

namespace mixq::oracle {

enum class TargetMode { Pure, Constrained };

std::string_view to_string(TargetMode m);
TargetMode parse_target_mode(std::string_view s);

struct ConfigRecord {
  graph::QuantConfig config;
  double oracle_loss = 0.0;
  double avg_bits = 0.0;           // without FP overhead
  double avg_bits_overhead = 0.0;  // with codebook/scale overhead
  double lambda = 0.0;
  TargetMode mode = TargetMode::Pure;
  double y = 0.0;
  std::vector<double> epsilons;  // per weight slot
  // Logical clock: position of the record in its corpus. Wall-clock times
  // would break byte-identical reruns.
  std::uint64_t timestamp = 0;
  std::uint64_t seed = 0;
  bool failed = false;  // non-finite loss; excluded from training
};

// y = -loss - lambda * avg_bits (constrained) or -loss (pure).
double target_value(double oracle_loss, double avg_bits, double lambda, TargetMode mode);

ConfigRecord evaluate_config(const ToyModel& model, const graph::QuantConfig& config, double lambda,
                             TargetMode mode);

// Default lambda: a 4 -> 3 bit drop is worth a quarter of the corpus loss
// range, i.e. lambda = 0.25 * (max loss - min loss) over non-failed records.
double auto_lambda(const std::vector<ConfigRecord>& records);

// Samples spec.n_configs configurations and evaluates them in index order.
// With no lambda the default above is applied after evaluation.
std::vector<ConfigRecord> generate_corpus(const ToyModel& model, const sampler::SampleSpec& spec,
                                          std::optional<double> lambda, TargetMode mode);

// Re-targets records under a new lambda/mode.
void retarget(std::vector<ConfigRecord>& records, double lambda, TargetMode mode);

}  // namespace mixq::oracle
