#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"
#include "mixq/quant/quant.hpp"

namespace mixq::quant {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int32_t nearest(const std::vector<double>& sorted_centroids, double v) {
  const auto it = std::lower_bound(sorted_centroids.begin(), sorted_centroids.end(), v);
  if (it == sorted_centroids.begin()) return 0;
  if (it == sorted_centroids.end()) return static_cast<std::int32_t>(sorted_centroids.size() - 1);
  const auto hi = static_cast<std::int32_t>(it - sorted_centroids.begin());
  // Lower index wins ties.
  return (v - sorted_centroids[hi - 1] <= sorted_centroids[hi] - v) ? hi - 1 : hi;
}

void finish(Clustering1D& c, std::span<const double> x) {
  c.assignment.resize(x.size());
  c.sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.assignment[i] = nearest(c.centroids, x[i]);
    const double d = x[i] - c.centroids[c.assignment[i]];
    c.sse += d * d;
  }
}

// Fewer distinct values than clusters: every value is its own centroid and
// the codebook is padded with copies of the largest value.
bool try_distinct(std::span<const double> x, int k, Clustering1D& out) {
  std::vector<double> d(x.begin(), x.end());
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  if (d.size() > static_cast<std::size_t>(k)) return false;
  out.centroids = d;
  out.centroids.resize(k, d.back());
  out.assignment.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.assignment[i] = static_cast<std::int32_t>(std::lower_bound(d.begin(), d.end(), x[i]) - d.begin());
  out.sse = 0.0;
  return true;
}

void check_input(std::span<const double> x, int k) {
  if (x.empty()) throw DataError("k-means: empty channel");
  if (k < 1) throw UsageError("k-means: k must be >= 1");
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("k-means: non-finite weight");
}

// Segment costs over sorted values via centered prefix sums.
class SegmentCost {
 public:
  explicit SegmentCost(const std::vector<double>& xs) : s1_(xs.size() + 1, 0.0), s2_(xs.size() + 1, 0.0) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double v = xs[i] - mean;
      s1_[i + 1] = s1_[i] + v;
      s2_[i + 1] = s2_[i] + v * v;
    }
  }
  // SSE of xs[j, i) around its mean.
  double operator()(std::size_t j, std::size_t i) const {
    const double a = s1_[i] - s1_[j];
    const double c = (s2_[i] - s2_[j]) - a * a / static_cast<double>(i - j);
    return c > 0.0 ? c : 0.0;
  }

 private:
  std::vector<double> s1_, s2_;
};

// Row c of the DP table: cur[i] = min_j prev[j] + cost(j, i). The optimal
// split index is monotone in i, which the divide-and-conquer recursion uses.
struct DpLayer {
  const SegmentCost& cost;
  const std::vector<double>& prev;
  std::vector<double>& cur;
  std::vector<std::uint32_t>& opt;
  std::size_t jmin;

  void solve(std::size_t lo, std::size_t hi, std::size_t optlo, std::size_t opthi) {
    if (lo > hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    double best = kInf;
    std::size_t arg = std::max(optlo, jmin);
    const std::size_t jhi = std::min(mid - 1, opthi);
    for (std::size_t j = std::max(optlo, jmin); j <= jhi; ++j) {
      const double v = prev[j] + cost(j, mid);
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    cur[mid] = best;
    opt[mid] = static_cast<std::uint32_t>(arg);
    if (mid > lo) solve(lo, mid - 1, optlo, arg);
    solve(mid + 1, hi, arg, opthi);
  }
};

}  // namespace

Clustering1D kmeans_1d_exact(std::span<const double> x, int k) {
  check_input(x, k);
  Clustering1D out;
  if (try_distinct(x, k, out)) return out;

  std::vector<double> xs(x.begin(), x.end());
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  const auto kk = static_cast<std::size_t>(k);
  const SegmentCost cost(xs);

  std::vector<double> prev(n + 1, kInf), cur(n + 1, kInf);
  std::vector<std::vector<std::uint32_t>> opt(kk + 1, std::vector<std::uint32_t>(n + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) prev[i] = cost(0, i);
  // Quadratic scan for small inputs, divide-and-conquer otherwise.
  const bool plain = n * n * kk <= 1'000'000;
  for (std::size_t c = 2; c <= kk; ++c) {
    std::fill(cur.begin(), cur.end(), kInf);
    if (plain) {
      for (std::size_t i = c; i <= n; ++i) {
        for (std::size_t j = c - 1; j < i; ++j) {
          const double v = prev[j] + cost(j, i);
          if (v < cur[i]) {
            cur[i] = v;
            opt[c][i] = static_cast<std::uint32_t>(j);
          }
        }
      }
    } else {
      DpLayer layer{cost, prev, cur, opt[c], c - 1};
      layer.solve(c, n, c - 1, n - 1);
    }
    std::swap(prev, cur);
  }

  out.centroids.assign(kk, 0.0);
  std::size_t i = n;
  for (std::size_t c = kk; c >= 1; --c) {
    const std::size_t j = c > 1 ? opt[c][i] : 0;
    double s = 0.0;
    for (std::size_t t = j; t < i; ++t) s += xs[t];
    out.centroids[c - 1] = s / static_cast<double>(i - j);
    i = j;
  }
  finish(out, x);
  return out;
}

Clustering1D kmeans_1d_lloyd(std::span<const double> x, int k, const KMeansOptions& opts) {
  check_input(x, k);
  Clustering1D best;
  if (try_distinct(x, k, best)) return best;
  const std::size_t n = x.size();
  const auto kk = static_cast<std::size_t>(k);
  best.sse = kInf;

  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(r));
    std::vector<double> cent;
    cent.reserve(kk);
    cent.push_back(x[rng.below(n)]);
    std::vector<double> d2(n);
    while (cent.size() < kk) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double m = kInf;
        for (double c : cent) m = std::min(m, (x[i] - c) * (x[i] - c));
        d2[i] = m;
        total += m;
      }
      double target = rng.uniform() * total;
      std::size_t pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      cent.push_back(x[pick]);
    }
    std::sort(cent.begin(), cent.end());

    std::vector<double> sum(kk);
    std::vector<std::size_t> cnt(kk);
    for (int it = 0; it < opts.max_iter; ++it) {
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(cnt.begin(), cnt.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<std::size_t>(nearest(cent, x[i]));
        sum[a] += x[i];
        ++cnt[a];
      }
      double shift = 0.0;
      for (std::size_t c = 0; c < kk; ++c) {
        if (cnt[c] == 0) continue;  // empty cluster keeps its centroid
        const double nc = sum[c] / static_cast<double>(cnt[c]);
        shift = std::max(shift, std::fabs(nc - cent[c]));
        cent[c] = nc;
      }
      std::sort(cent.begin(), cent.end());
      if (shift < opts.tol) break;
    }
    Clustering1D run;
    run.centroids = cent;
    finish(run, x);
    if (run.sse < best.sse) best = std::move(run);
  }
  return best;
}

QuantizedTensor kmeans_quantize(const WeightTensor& w, int n_q, KMeansMode mode,
                                const KMeansOptions& opts) {
  if (n_q < 1 || n_q > 16) throw UsageError("k-means: n_q must be in [1, 16]");
  if (w.size() == 0 || w.cols() == 0) throw DataError("k-means: empty tensor");
  const int k = 1 << n_q;
  auto solve = [&](std::span<const double> v) {
    return opts.solver == KMeansSolver::Exact ? kmeans_1d_exact(v, k) : kmeans_1d_lloyd(v, k, opts);
  };

  QuantizedTensor q;
  q.method = mode == KMeansMode::PerChannel ? QuantMethod::KMeansC : QuantMethod::KMeansA;
  q.n_q = n_q;
  q.rows = w.rows();
  q.cols = w.cols();
  q.codes.resize(w.size());
  if (mode == KMeansMode::PerChannel) {
    q.codebooks.reserve(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto c = solve(w.row(r));
      std::copy(c.assignment.begin(), c.assignment.end(), q.codes.begin() + r * w.cols());
      q.codebooks.push_back(std::move(c.centroids));
    }
  } else {
    auto c = solve(w.values());
    q.codes = std::move(c.assignment);
    q.codebooks.push_back(std::move(c.centroids));
  }
  return q;
}

}  // namespace mixq::quant
