#pragma once

#include <cstdint>
#include <limits>
#include <utility>

namespace mixq {

// Counter-based generator: output n of stream s under seed k is a pure
// SplitMix64 hash of (k, s, n). Substreams are cheap and independent, so
// work split across threads stays reproducible. Distributions are
// implemented here rather than through <random>, whose algorithms are
// implementation-defined.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller, one draw consumed per pair of uniforms).
  double normal();

  CounterRng substream(std::uint64_t id) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  CounterRng(std::uint64_t key, std::uint64_t counter, int) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Shuffle in place with Fisher-Yates driven by `rng`.
template <class It>
void shuffle(It first, It last, CounterRng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace mixq
