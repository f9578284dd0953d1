#pragma once

#include <cstddef>
#include <vector>

namespace mixq::oracle {

struct LossBits {
  double loss = 0.0;
  double bits = 0.0;
};

// a dominates b: no worse in both coordinates and better in at least one.
bool dominates(const LossBits& a, const LossBits& b);

// Indices of the non-dominated points, ordered by (bits, loss, index).
// Identical points do not dominate each other.
std::vector<std::size_t> pareto_frontier(const std::vector<LossBits>& points);

}  // namespace mixq::oracle
