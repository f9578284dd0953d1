#pragma once

// Ensembles of surrogates trained on different folds, with per-hop
// validation weights and score standardization.

#include <cstdint>
#include <string>
#include <vector>

#include "mixq/ensemble/folds.hpp"
#include "mixq/oracle/corpus.hpp"
#include "mixq/surrogate/batch.hpp"
#include "mixq/surrogate/train.hpp"

namespace mixq::ensemble {

struct HopMetrics {
  int hop = 0;
  double srcc = 0.0;  // held-out, hop score vs target
  double ndcg = 0.0;  // held-out NDCG@10
  double weight = 0.0;
  // Training-set statistics of designated-node norms at this hop.
  double mean = 0.0;
  double std = 0.0;
  bool usable = false;  // std > 0
};

struct EnsembleMember {
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  surrogate::SurrogateParams params;
  surrogate::TargetScaler scaler;
  std::vector<HopMetrics> hops;  // one per active hop, same order
  double pred_srcc = 0.0;        // held-out SRCC of the regression output
  std::vector<surrogate::EpochLog> log;

  const HopMetrics& hop(int m) const;
};

struct Ensemble {
  surrogate::TrainSpec spec;
  FoldPlan plan;
  std::vector<int> active_hops;
  std::vector<EnsembleMember> members;
  std::vector<std::string> warnings;

  bool has_hop(int m) const;
};

// Validation weight of one hop: SRCC for the Spearman loss, NDCG@10 for
// LambdaRank and their product for the hybrid loss, each clamped at 0.
double member_weight(surrogate::RankLossKind kind, double srcc, double ndcg);

// Corpus records as surrogate samples; failed records are skipped.
std::vector<surrogate::GraphSample> make_samples(const oracle::ToyModel& model,
                                                 const std::vector<oracle::ConfigRecord>& records, int layers);

// Pooled L1 norms of every designated node at hop m over the given samples
// (eval mode).
std::vector<double> designated_norms(const surrogate::SurrogateParams& p, const std::vector<surrogate::GraphSample>& s,
                                     const std::vector<std::size_t>& idx, int m);

// Fills hops and pred_srcc of a trained member from its train/validation split.
void evaluate_member(EnsembleMember& member, const std::vector<surrogate::GraphSample>& samples,
                     const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                     const std::vector<int>& active_hops, surrogate::RankLossKind kind);

// One member per fold, trained concurrently. A member whose training
// diverges is dropped with a warning; no surviving member is a NumericError.
Ensemble train_ensemble(const std::vector<surrogate::GraphSample>& samples, const surrogate::TrainSpec& spec,
                        const FoldPlan& plan, std::size_t threads = 0);

}  // namespace mixq::ensemble
