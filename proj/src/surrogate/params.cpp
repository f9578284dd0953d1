#include "mixq/surrogate/params.hpp"

#include <cmath>

#include "mixq/core/errors.hpp"
#include "mixq/core/rng.hpp"

namespace mixq::surrogate {

std::size_t SurrogateParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

bool SurrogateParams::all_finite() const {
  for (const auto* set : {&tensors, &buffers})
    for (const auto& t : *set)
      for (double x : t.v)
        if (!std::isfinite(x)) return false;
  return true;
}

SurrogateParams init_params(const SurrogateDims& d, int op_vocab, std::uint64_t seed) {
  if (d.hidden < 1 || d.layers < 0 || op_vocab < 1) throw UsageError("surrogate: invalid dimensions");
  SurrogateParams p;
  p.dims = d;
  CounterRng rng(seed, 0x5eed);
  const auto h = static_cast<std::size_t>(d.hidden);
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, double bound) {
    Tensor t{std::move(name), rows, cols, std::vector<double>(rows * cols)};
    for (auto& x : t.v) x = rng.uniform(-bound, bound);
    p.tensors.push_back(std::move(t));
  };
  auto fill = [&](std::string name, std::size_t n, double value) {
    p.tensors.push_back(Tensor{std::move(name), 1, n, std::vector<double>(n, value)});
  };
  auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  add("emb.method", 4, static_cast<std::size_t>(d.method_dim), 1.0);
  add("emb.bits", 3, static_cast<std::size_t>(d.bits_dim), 1.0);
  add("emb.op", static_cast<std::size_t>(op_vocab), static_cast<std::size_t>(d.op_dim), 1.0);
  add("emb.block", static_cast<std::size_t>(d.block_vocab), static_cast<std::size_t>(d.block_dim), 1.0);
  add("scalar.w", 2, static_cast<std::size_t>(d.scalar_dim), fan(2));
  add("scalar.b", 1, static_cast<std::size_t>(d.scalar_dim), fan(2));
  const auto in = static_cast<std::size_t>(d.input_dim());
  add("fuse.w", in, h, fan(in));
  add("fuse.b", 1, h, fan(in));
  fill("bn0.gamma", h, 1.0);
  fill("bn0.beta", h, 0.0);
  for (int l = 0; l < d.layers; ++l) {
    const std::string pre = "mp" + std::to_string(l) + ".";
    add(pre + "ws", h, h, fan(h));
    add(pre + "bs", 1, h, fan(h));
    add(pre + "wt", h, h, fan(h));
    add(pre + "bt", 1, h, fan(h));
    add(pre + "att", 1, h, fan(h));
    add(pre + "bias", 1, h, fan(h));
    fill(pre + "bn.gamma", h, 1.0);
    fill(pre + "bn.beta", h, 0.0);
  }
  const auto mid = static_cast<std::size_t>(d.head_mid);
  add("head.0.w", h, h, fan(h));
  add("head.0.b", 1, h, fan(h));
  add("head.1.w", h, h, fan(h));
  add("head.1.b", 1, h, fan(h));
  add("head.2.w", h, mid, fan(h));
  add("head.2.b", 1, mid, fan(h));
  add("head.3.w", mid, 1, fan(mid));
  add("head.3.b", 1, 1, fan(mid));

  for (int b = 0; b <= d.layers; ++b) {
    p.buffers.push_back(Tensor{"bn" + std::to_string(b) + ".running_mean", 1, h, std::vector<double>(h, 0.0)});
    p.buffers.push_back(Tensor{"bn" + std::to_string(b) + ".running_var", 1, h, std::vector<double>(h, 1.0)});
  }
  return p;
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& t) {
  std::vector<Tensor> out;
  out.reserve(t.size());
  for (const auto& x : t) out.push_back(Tensor{x.name, x.rows, x.cols, std::vector<double>(x.size(), 0.0)});
  return out;
}

}  // namespace mixq::surrogate
