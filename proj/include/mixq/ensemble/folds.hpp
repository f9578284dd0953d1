#pragma once

// K-fold splits of a corpus into disjoint validation blocks.

#include <cstdint>
#include <vector>

namespace mixq::ensemble {

struct FoldPlan {
  std::size_t n = 0;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  // Per fold, sorted index sets. Validation blocks are pairwise disjoint
  // and cover 0..n-1 when k >= 2.
  std::vector<std::vector<std::size_t>> train, validation;
};

// Shuffles 0..n-1 and cuts it into k blocks whose sizes differ by at most
// one; fold i validates on block i and trains on the rest. k = 1 holds out
// a fifth of the shuffled corpus (at least one sample) as the only fold.
// Throws UsageError for k = 0, n < k, or n < 2.
FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace mixq::ensemble
