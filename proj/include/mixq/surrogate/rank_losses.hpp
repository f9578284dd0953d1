#pragma once

// Differentiable ranking losses between hop scores and targets.

#include <cstdint>
#include <string_view>
#include <vector>

namespace mixq::surrogate {

enum class RankLossKind { SoftSpearman, LambdaRank, Hybrid };

std::string_view to_string(RankLossKind k);
// Accepts "srcc", "ndcg", "hybrid".
RankLossKind parse_rank_loss(std::string_view s);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d scores
  // Hash of the piecewise structure (sort orders, isotonic blocks); equal
  // signatures mean no kink was crossed between two evaluations.
  std::uint64_t signature = 0;
};

// Soft ranks (ascending, rank n = largest) of theta / tau: the Euclidean
// projection onto the permutahedron of (1..n), via isotonic regression.
struct SoftRank {
  std::vector<double> ranks;
  std::vector<std::size_t> order;        // theta sorted descending
  std::vector<std::size_t> block_start;  // isotonic blocks over `order`, plus end
};
SoftRank soft_rank(const std::vector<double>& theta, double tau);
// Vector-Jacobian product of soft_rank.
std::vector<double> soft_rank_vjp(const SoftRank& sr, const std::vector<double>& g, double tau);

// Ranks 1..n with ties averaged.
std::vector<double> average_ranks(const std::vector<double>& x);

// 1 - Pearson(soft_rank(standardize(scores), tau), rank(targets)).
// Constant targets throw DataError; constant scores give loss 1, grad 0.
LossGrad soft_spearman_loss(const std::vector<double>& scores, const std::vector<double>& targets, double tau = 1.0,
                            bool standardize = true);

// Relevance grades: targets min-max normalized, 16 uniform levels.
std::vector<int> relevance_grades(const std::vector<double>& targets, int levels = 16);

// Pairwise logistic loss weighted by |delta NDCG| over the full list.
LossGrad lambdarank_loss(const std::vector<double>& scores, const std::vector<double>& targets);

LossGrad rank_loss(RankLossKind kind, const std::vector<double>& scores, const std::vector<double>& targets,
                   double tau = 1.0);

}  // namespace mixq::surrogate
