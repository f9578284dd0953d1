#include "mixq/oracle/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mixq::oracle {

bool dominates(const LossBits& a, const LossBits& b) {
  return a.loss <= b.loss && a.bits <= b.bits && (a.loss < b.loss || a.bits < b.bits);
}

std::vector<std::size_t> pareto_frontier(const std::vector<LossBits>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].bits != points[b].bits) return points[a].bits < points[b].bits;
    if (points[a].loss != points[b].loss) return points[a].loss < points[b].loss;
    return a < b;
  });
  // Sweep groups of identical points; a group survives iff its loss beats
  // every strictly earlier group.
  std::vector<std::size_t> out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const auto& p = points[order[i]];
    while (j < order.size() && points[order[j]].bits == p.bits && points[order[j]].loss == p.loss) ++j;
    if (p.loss < best) out.insert(out.end(), order.begin() + static_cast<std::ptrdiff_t>(i),
                                  order.begin() + static_cast<std::ptrdiff_t>(j));
    best = std::min(best, p.loss);
    i = j;
  }
  return out;
}

}  // namespace mixq::oracle
