#include "mixq/ensemble/folds.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"

namespace mixq::ensemble {

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw UsageError("number of folds must be >= 1");
  if (n < 2 || n < k)
    throw UsageError("cannot split " + std::to_string(n) + " samples into " + std::to_string(k) + " folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(seed, 0xf01d5);
  shuffle(perm.begin(), perm.end(), rng);

  FoldPlan plan;
  plan.n = n;
  plan.k = k;
  plan.seed = seed;
  auto add = [&](std::vector<std::size_t> val) {
    std::vector<char> in_val(n, 0);
    for (auto i : val) in_val[i] = 1;
    std::vector<std::size_t> tr;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_val[i]) tr.push_back(i);
    std::sort(val.begin(), val.end());
    plan.train.push_back(std::move(tr));
    plan.validation.push_back(std::move(val));
  };
  if (k == 1) {
    const std::size_t hold = std::max<std::size_t>(1, n / 5);
    add({perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(hold)});
    return plan;
  }
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    add({perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len)});
    pos += len;
  }
  return plan;
}

}  // namespace mixq::ensemble
