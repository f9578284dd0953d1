#pragma once

#include <cstddef>
#include <vector>

namespace mixq::surrogate {

// Pearson correlation; 0 when either side is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b);
// Spearman rank correlation with tie-averaged ranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b);
// NDCG@k of the ordering induced by `scores` (descending, ties by index)
// against 16-level relevance grades of `targets`. 1 when every item has the
// same grade.
double ndcg_at_k(const std::vector<double>& scores, const std::vector<double>& targets, std::size_t k = 10);

}  // namespace mixq::surrogate
