#include "mixq/surrogate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixq/core/errors.hpp"
#include "mixq/surrogate/rank_losses.hpp"

namespace mixq::surrogate {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw UsageError("pearson: size mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

double ndcg_at_k(const std::vector<double>& scores, const std::vector<double>& targets, std::size_t k) {
  if (scores.size() != targets.size() || scores.empty()) throw UsageError("ndcg: size mismatch");
  const auto grade = relevance_grades(targets);
  std::vector<double> gain(grade.size());
  for (std::size_t i = 0; i < gain.size(); ++i) gain[i] = std::exp2(grade[i]) - 1.0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<double> ideal = gain;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t top = std::min(k, scores.size());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 0; r < top; ++r) {
    const double disc = 1.0 / std::log2(static_cast<double>(r) + 2.0);
    dcg += gain[order[r]] * disc;
    idcg += ideal[r] * disc;
  }
  return idcg > 0.0 ? dcg / idcg : 1.0;
}

}  // namespace mixq::surrogate
