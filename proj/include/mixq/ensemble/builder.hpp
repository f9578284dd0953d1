#pragma once

// Ensemble scores of candidate quantization settings and the op-level and
// block-level configuration builders.
//
// A query applies a candidate assignment to a few weight nodes of the base
// graph, holds every other weight node at the reference choice, and reads the
// L1 norm of one node's hop-m embedding. The ensemble score is
//   sum_k w_k^m * (||h_root^m||_1 - mean_k^m) / std_k^m
// over members k.

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mixq/ensemble/ensemble.hpp"
#include "mixq/graph/annotate.hpp"
#include "mixq/graph/families.hpp"
#include "mixq/oracle/toy_model.hpp"

namespace mixq::ensemble {

struct BuildOptions {
  graph::QuantChoice reference{quant::QuantMethod::KMeansC, 4};
  std::size_t enumeration_limit = 7;  // max weight nodes per block subgraph
  std::size_t batch = 256;            // candidates per forward pass
  std::size_t threads = 0;
  bool keep_rows = true;
};

// What scoring needs from a model: structure and per-choice layer features.
struct ScoringBase {
  std::shared_ptr<const graph::NetGraph> graph;
  std::vector<graph::SubgraphSpec> catalog;
  const graph::QuantTable* table = nullptr;

  static ScoringBase from(const oracle::ToyModel& model);
};

struct Query {
  std::size_t root = 0;             // node whose embedding is read
  int hop = 0;
  std::vector<std::size_t> slots;   // weight slots receiving the candidate
  std::vector<int> choices;         // choice index per slot
};

struct ScoreRow {
  std::string level;      // "op" or "block"
  std::string target;     // node id (op) or subgraph root id (block)
  std::string category;   // subgraph category, empty for op-level
  std::string candidate;  // "id=3C;id=4A" style assignment
  int hop = 0;
  std::size_t member = 0;
  double raw = 0.0;
  double standardized = 0.0;
  double weighted = 0.0;
};

// "3C", "4A", "3U".
std::string choice_label(graph::QuantChoice c);

class Scorer {
 public:
  Scorer(const Ensemble& ens, ScoringBase base, BuildOptions opts = {});

  // Total ensemble score per query. Rows (one per query and member, in query
  // order) are appended when rows != nullptr; their level/target/category
  // fields are left for the caller.
  std::vector<double> score(const std::vector<Query>& queries, std::vector<ScoreRow>* rows = nullptr) const;

  const std::vector<graph::NodeFeatures>& reference_features() const { return reference_; }

 private:
  const Ensemble& ens_;
  ScoringBase base_;
  BuildOptions opts_;
  std::shared_ptr<const surrogate::HopSets> hops_;
  std::vector<graph::NodeFeatures> reference_;
};

struct OpLevelResult {
  graph::QuantConfig config;
  std::vector<std::array<double, graph::kNumChoices>> scores;  // per weight slot
  std::vector<ScoreRow> rows;
};

// Per weight node, the choice with the highest hop-0 score; ties go to the
// earlier choice in the canonical order (fewer bits, then C < A < U).
OpLevelResult build_op_level(const ScoringBase& base, const Ensemble& ens, const BuildOptions& opts = {});

struct SubgraphChoice {
  std::size_t index = 0;  // catalog entry
  std::size_t candidates = 0;
  std::vector<int> best;  // choice index per weight member
  double score = 0.0;
};

struct BlockLevelResult {
  graph::QuantConfig config;
  std::vector<SubgraphChoice> subgraphs;
  std::vector<ScoreRow> rows;
};

// Per catalog subgraph, every joint assignment of its weight members scored
// at the root's hop. Ties go to fewer total bits, then to the
// lexicographically smaller choice tuple.
BlockLevelResult build_block_level(const ScoringBase& base, const Ensemble& ens, const BuildOptions& opts = {});

// Joint assignments of n nodes in enumeration order (first node most
// significant); 6^n entries.
std::vector<std::vector<int>> enumerate_assignments(std::size_t n);

}  // namespace mixq::ensemble
