#include "mixq/surrogate/model.hpp"

#include <algorithm>
#include <cmath>

#include "mixq/core/errors.hpp"
#include "mixq/simd/kernels.hpp"

namespace mixq::surrogate {
namespace {

using Vec = std::vector<double>;

// Y[n x c] = X[n x k] W[k x c] + bias (bias may be null).
void affine(const double* x, std::size_t n, std::size_t k, const Vec& w, const double* bias, std::size_t c,
            Vec& y) {
  y.assign(n * c, 0.0);
  if (bias)
    for (std::size_t i = 0; i < n; ++i) std::copy(bias, bias + c, y.data() + i * c);
  simd::kernels().gemm(n, c, k, x, k, 1, w.data(), c, y.data(), c);
}

// dW[k x c] += X^T dY, db[c] += colsum(dY), dX[n x k] += dY W^T (dX may be null).
void affine_back(const double* x, std::size_t n, std::size_t k, const Vec& w, std::size_t c, const Vec& dy,
                 Vec& dw, Vec* db, double* dx) {
  const auto& kt = simd::kernels();
  kt.gemm(k, c, n, x, 1, k, dy.data(), c, dw.data(), c);
  if (db)
    for (std::size_t i = 0; i < n; ++i) kt.axpy(1.0, dy.data() + i * c, db->data(), c);
  if (dx) {
    Vec wt(c * k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t bb = 0; bb < c; ++bb) wt[bb * k + a] = w[a * c + bb];
    kt.gemm(n, k, c, dy.data(), c, 1, wt.data(), k, dx, k);
  }
}

void bn_forward(const Vec& z, std::size_t n, std::size_t c, const Vec& gamma, const Vec& beta, Mode mode,
                const Vec& rmean, const Vec& rvar, BnCache& bc) {
  bc.rows = n;
  bc.xhat.resize(n * c);
  bc.out.resize(n * c);
  bc.invstd.resize(c);
  if (mode == Mode::Train) {
    if (n < 2) throw NumericError("batch norm needs at least two rows in training mode");
    bc.mean.assign(c, 0.0);
    bc.var.assign(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) bc.mean[j] += z[i * c + j];
    for (auto& m : bc.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = z[i * c + j] - bc.mean[j];
        bc.var[j] += d * d;
      }
    for (auto& v : bc.var) v /= static_cast<double>(n);
    for (std::size_t j = 0; j < c; ++j) bc.invstd[j] = 1.0 / std::sqrt(bc.var[j] + kBnEps);
  } else {
    bc.mean = rmean;
    bc.var = rvar;
    for (std::size_t j = 0; j < c; ++j) bc.invstd[j] = 1.0 / std::sqrt(rvar[j] + kBnEps);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (z[i * c + j] - bc.mean[j]) * bc.invstd[j];
      bc.xhat[i * c + j] = xh;
      bc.out[i * c + j] = gamma[j] * xh + beta[j];
    }
}

// dout -> dz; accumulates dgamma, dbeta.
void bn_backward(const BnCache& bc, std::size_t c, const Vec& gamma, Mode mode, const Vec& dout, Vec& dgamma,
                 Vec& dbeta, Vec& dz) {
  const std::size_t n = bc.rows;
  dz.assign(n * c, 0.0);
  Vec sum_dx(c, 0.0), sum_dx_xh(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double g = dout[i * c + j];
      const double xh = bc.xhat[i * c + j];
      dgamma[j] += g * xh;
      dbeta[j] += g;
      const double dxh = g * gamma[j];
      sum_dx[j] += dxh;
      sum_dx_xh[j] += dxh * xh;
    }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double dxh = dout[i * c + j] * gamma[j];
      if (mode == Mode::Train) {
        dz[i * c + j] = bc.invstd[j] * (dxh - inv_n * sum_dx[j] - bc.xhat[i * c + j] * inv_n * sum_dx_xh[j]);
      } else {
        dz[i * c + j] = bc.invstd[j] * dxh;
      }
    }
}

inline double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void forward(const SurrogateParams& p, const Batch& b, Mode mode, ForwardCache& c, int max_layer) {
  const auto& d = p.dims;
  const auto H = static_cast<std::size_t>(d.hidden);
  const std::size_t N = b.nodes, B = b.graphs, E = b.edges();
  const auto L = static_cast<std::size_t>(d.layers);
  const bool full = max_layer < 0;
  const std::size_t run = full ? L : std::min<std::size_t>(L, static_cast<std::size_t>(max_layer));
  const auto& T = p.tensors;
  c.mode = mode;
  c.layers_run = static_cast<int>(run);

  // Input embedding.
  const auto in_dim = static_cast<std::size_t>(d.input_dim());
  const auto md = static_cast<std::size_t>(d.method_dim), bd = static_cast<std::size_t>(d.bits_dim),
             od = static_cast<std::size_t>(d.op_dim), kd = static_cast<std::size_t>(d.block_dim),
             sd = static_cast<std::size_t>(d.scalar_dim);
  c.x0.assign(N * in_dim, 0.0);
  const auto& sw = T[slot::kScalarW].v;
  const auto& sb = T[slot::kScalarB].v;
  for (std::size_t n = 0; n < N; ++n) {
    const int mi = b.method[n], bi = b.bits[n], oi = b.op[n];
    if (mi < 0 || mi >= 4 || bi < 0 || bi >= 3 || oi < 0 || static_cast<std::size_t>(oi) >= T[slot::kEmbOp].rows ||
        b.block[n] < 0)
      throw DataError("node features do not match the embedding tables");
    const auto ki = static_cast<std::size_t>(std::min(b.block[n], d.block_vocab - 1));
    double* row = c.x0.data() + n * in_dim;
    std::copy_n(T[slot::kEmbMethod].v.data() + static_cast<std::size_t>(mi) * md, md, row);
    std::copy_n(T[slot::kEmbBits].v.data() + static_cast<std::size_t>(bi) * bd, bd, row + md);
    std::copy_n(T[slot::kEmbOp].v.data() + static_cast<std::size_t>(oi) * od, od, row + md + bd);
    std::copy_n(T[slot::kEmbBlock].v.data() + ki * kd, kd, row + md + bd + od);
    double* srow = row + md + bd + od + kd;
    const double s0 = b.scalars[2 * n], s1 = b.scalars[2 * n + 1];
    for (std::size_t j = 0; j < sd; ++j) srow[j] = s0 * sw[j] + s1 * sw[sd + j] + sb[j];
  }
  Vec z;
  affine(c.x0.data(), N, in_dim, T[slot::kFuseW].v, T[slot::kFuseB].v.data(), H, z);
  bn_forward(z, N, H, T[slot::kBn0Gamma].v, T[slot::kBn0Beta].v, mode, p.buffers[0].v, p.buffers[1].v, c.bn0);
  c.h.assign(run + 1, {});
  c.h[0].resize(N * H);
  for (std::size_t i = 0; i < N * H; ++i) c.h[0][i] = std::max(0.0, c.bn0.out[i]);

  // Message passing.
  c.layer.assign(run, {});
  for (std::size_t l = 0; l < run; ++l) {
    auto& lc = c.layer[l];
    const Vec& hin = c.h[l];
    affine(hin.data(), N, H, T[slot::layer(l, slot::kWs)].v, T[slot::layer(l, slot::kBs)].v.data(), H, lc.xs);
    affine(hin.data(), N, H, T[slot::layer(l, slot::kWt)].v, T[slot::layer(l, slot::kBt)].v.data(), H, lc.xt);
    const auto& att = T[slot::layer(l, slot::kAtt)].v;
    const auto& bias = T[slot::layer(l, slot::kBias)].v;
    lc.u.resize(E * H);
    lc.alpha.resize(E);
    Vec g(N * H);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t e0 = b.in_ptr[i], e1 = b.in_ptr[i + 1];
      double mx = -INFINITY;
      for (std::size_t e = e0; e < e1; ++e) {
        const std::size_t j = b.in_src[e];
        double logit = 0.0;
        for (std::size_t k = 0; k < H; ++k) {
          const double u = lc.xs[j * H + k] + lc.xt[i * H + k];
          lc.u[e * H + k] = u;
          logit += att[k] * leaky(u);
        }
        lc.alpha[e] = logit;
        mx = std::max(mx, logit);
      }
      double sum = 0.0;
      for (std::size_t e = e0; e < e1; ++e) {
        lc.alpha[e] = std::exp(lc.alpha[e] - mx);
        sum += lc.alpha[e];
      }
      double* gi = g.data() + i * H;
      std::copy(bias.begin(), bias.end(), gi);
      for (std::size_t e = e0; e < e1; ++e) {
        lc.alpha[e] /= sum;
        simd::kernels().axpy(lc.alpha[e], lc.xs.data() + b.in_src[e] * H, gi, H);
      }
    }
    bn_forward(g, N, H, T[slot::layer(l, slot::kBnGamma)].v, T[slot::layer(l, slot::kBnBeta)].v, mode,
               p.buffers[2 * (l + 1)].v, p.buffers[2 * (l + 1) + 1].v, lc.bn);
    c.h[l + 1].resize(N * H);
    for (std::size_t i = 0; i < N * H; ++i) c.h[l + 1][i] = hin[i] + std::max(0.0, lc.bn.out[i]);
  }

  // Hop-level graph embeddings.
  const std::size_t levels = b.hop_ptr.size();
  c.hop_mean.assign(levels, {});
  c.hop_norm.assign(levels, {});
  for (std::size_t m = 0; m < levels && m <= run; ++m) {
    if (b.hop_nodes[m].empty()) continue;
    auto& hm = c.hop_mean[m];
    hm.assign(B * H, 0.0);
    c.hop_norm[m].assign(B, 0.0);
    for (std::size_t gi = 0; gi < B; ++gi) {
      const std::size_t k0 = b.hop_ptr[m][gi], k1 = b.hop_ptr[m][gi + 1];
      if (k0 == k1) continue;
      double* row = hm.data() + gi * H;
      for (std::size_t k = k0; k < k1; ++k) simd::kernels().axpy(1.0, c.h[m].data() + b.hop_nodes[m][k] * H, row, H);
      const double inv = 1.0 / static_cast<double>(k1 - k0);
      for (std::size_t j = 0; j < H; ++j) row[j] *= inv;
      c.hop_norm[m][gi] = simd::kernels().sum_abs(row, H);
    }
  }

  c.pred.clear();
  if (!full) return;
  // Readout over all nodes at hop M, then the head.
  c.readout.assign(B * H, 0.0);
  for (std::size_t gi = 0; gi < B; ++gi) {
    const std::size_t n0 = b.node_ptr[gi], n1 = b.node_ptr[gi + 1];
    double* row = c.readout.data() + gi * H;
    for (std::size_t n = n0; n < n1; ++n) simd::kernels().axpy(1.0, c.h[run].data() + n * H, row, H);
    const double inv = 1.0 / static_cast<double>(n1 - n0);
    for (std::size_t j = 0; j < H; ++j) row[j] *= inv;
  }
  const auto mid = static_cast<std::size_t>(d.head_mid);
  const int Li = d.layers;
  affine(c.readout.data(), B, H, T[slot::head(Li, 0)].v, T[slot::head(Li, 1)].v.data(), H, c.a1);
  affine(c.a1.data(), B, H, T[slot::head(Li, 2)].v, T[slot::head(Li, 3)].v.data(), H, c.a2);
  Vec r2(B * H);
  for (std::size_t i = 0; i < B * H; ++i) r2[i] = std::max(0.0, c.a2[i]);
  affine(r2.data(), B, H, T[slot::head(Li, 4)].v, T[slot::head(Li, 5)].v.data(), mid, c.a3);
  affine(c.a3.data(), B, mid, T[slot::head(Li, 6)].v, T[slot::head(Li, 7)].v.data(), 1, c.pred);
}

void backward(const SurrogateParams& p, const Batch& b, const ForwardCache& c, const Vec& dpred,
              const std::vector<Vec>& dhop, std::vector<Tensor>& G) {
  const auto& d = p.dims;
  const auto H = static_cast<std::size_t>(d.hidden);
  const std::size_t N = b.nodes, B = b.graphs;
  const auto L = static_cast<std::size_t>(d.layers);
  const auto& T = p.tensors;
  if (c.pred.size() != B || static_cast<std::size_t>(c.layers_run) != L)
    throw UsageError("backward requires a full forward pass");
  if (dpred.size() != B) throw UsageError("backward: dpred size mismatch");
  const auto mid = static_cast<std::size_t>(d.head_mid);
  const int Li = d.layers;

  // Head.
  Vec da3(B * mid, 0.0), dr2(B * H, 0.0), da1(B * H, 0.0), dread(B * H, 0.0);
  Vec r2(B * H);
  for (std::size_t i = 0; i < B * H; ++i) r2[i] = std::max(0.0, c.a2[i]);
  affine_back(c.a3.data(), B, mid, T[slot::head(Li, 6)].v, 1, dpred, G[slot::head(Li, 6)].v, &G[slot::head(Li, 7)].v,
              da3.data());
  affine_back(r2.data(), B, H, T[slot::head(Li, 4)].v, mid, da3, G[slot::head(Li, 4)].v, &G[slot::head(Li, 5)].v,
              dr2.data());
  Vec da2(B * H);
  for (std::size_t i = 0; i < B * H; ++i) da2[i] = c.a2[i] > 0.0 ? dr2[i] : 0.0;
  affine_back(c.a1.data(), B, H, T[slot::head(Li, 2)].v, H, da2, G[slot::head(Li, 2)].v, &G[slot::head(Li, 3)].v,
              da1.data());
  affine_back(c.readout.data(), B, H, T[slot::head(Li, 0)].v, H, da1, G[slot::head(Li, 0)].v,
              &G[slot::head(Li, 1)].v, dread.data());

  // dh[m] collects gradients from the readout (m = L), hop norms and the
  // residual/message path.
  std::vector<Vec> dh(L + 1, Vec(N * H, 0.0));
  for (std::size_t gi = 0; gi < B; ++gi) {
    const std::size_t n0 = b.node_ptr[gi], n1 = b.node_ptr[gi + 1];
    const double inv = 1.0 / static_cast<double>(n1 - n0);
    for (std::size_t n = n0; n < n1; ++n)
      simd::kernels().axpy(inv, dread.data() + gi * H, dh[L].data() + n * H, H);
  }
  for (std::size_t m = 0; m < dhop.size() && m < c.hop_mean.size(); ++m) {
    if (dhop[m].empty() || c.hop_mean[m].empty()) continue;
    for (std::size_t gi = 0; gi < B; ++gi) {
      const std::size_t k0 = b.hop_ptr[m][gi], k1 = b.hop_ptr[m][gi + 1];
      if (k0 == k1 || dhop[m][gi] == 0.0) continue;
      const double inv = dhop[m][gi] / static_cast<double>(k1 - k0);
      const double* mean = c.hop_mean[m].data() + gi * H;
      for (std::size_t k = k0; k < k1; ++k) {
        double* row = dh[m].data() + b.hop_nodes[m][k] * H;
        for (std::size_t j = 0; j < H; ++j) row[j] += inv * sign(mean[j]);
      }
    }
  }

  // Message-passing layers, last to first.
  for (std::size_t li = L; li-- > 0;) {
    const auto& lc = c.layer[li];
    const Vec& hin = c.h[li];
    const Vec& dout = dh[li + 1];
    Vec& dhin = dh[li];
    for (std::size_t i = 0; i < N * H; ++i) dhin[i] += dout[i];
    Vec dy(N * H);
    for (std::size_t i = 0; i < N * H; ++i) dy[i] = lc.bn.out[i] > 0.0 ? dout[i] : 0.0;
    Vec dg;
    bn_backward(lc.bn, H, T[slot::layer(li, slot::kBnGamma)].v, c.mode, dy, G[slot::layer(li, slot::kBnGamma)].v,
                G[slot::layer(li, slot::kBnBeta)].v, dg);
    const auto& att = T[slot::layer(li, slot::kAtt)].v;
    auto& datt = G[slot::layer(li, slot::kAtt)].v;
    auto& dbias = G[slot::layer(li, slot::kBias)].v;
    Vec dxs(N * H, 0.0), dxt(N * H, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t e0 = b.in_ptr[i], e1 = b.in_ptr[i + 1];
      const double* dgi = dg.data() + i * H;
      simd::kernels().axpy(1.0, dgi, dbias.data(), H);
      double s = 0.0;
      thread_local Vec dalpha;
      dalpha.assign(e1 - e0, 0.0);
      for (std::size_t e = e0; e < e1; ++e) {
        const std::size_t j = b.in_src[e];
        dalpha[e - e0] = simd::kernels().dot(dgi, lc.xs.data() + j * H, H);
        simd::kernels().axpy(lc.alpha[e], dgi, dxs.data() + j * H, H);
        s += lc.alpha[e] * dalpha[e - e0];
      }
      for (std::size_t e = e0; e < e1; ++e) {
        const std::size_t j = b.in_src[e];
        const double dlogit = lc.alpha[e] * (dalpha[e - e0] - s);
        if (dlogit == 0.0) continue;
        const double* u = lc.u.data() + e * H;
        double* dxsj = dxs.data() + j * H;
        double* dxti = dxt.data() + i * H;
        for (std::size_t k = 0; k < H; ++k) {
          datt[k] += dlogit * leaky(u[k]);
          const double du = dlogit * att[k] * leaky_grad(u[k]);
          dxsj[k] += du;
          dxti[k] += du;
        }
      }
    }
    affine_back(hin.data(), N, H, T[slot::layer(li, slot::kWs)].v, H, dxs, G[slot::layer(li, slot::kWs)].v,
                &G[slot::layer(li, slot::kBs)].v, dhin.data());
    affine_back(hin.data(), N, H, T[slot::layer(li, slot::kWt)].v, H, dxt, G[slot::layer(li, slot::kWt)].v,
                &G[slot::layer(li, slot::kBt)].v, dhin.data());
  }

  // Input fusion and embeddings.
  Vec dy0(N * H);
  for (std::size_t i = 0; i < N * H; ++i) dy0[i] = c.bn0.out[i] > 0.0 ? dh[0][i] : 0.0;
  Vec dz;
  bn_backward(c.bn0, H, T[slot::kBn0Gamma].v, c.mode, dy0, G[slot::kBn0Gamma].v, G[slot::kBn0Beta].v, dz);
  const auto in_dim = static_cast<std::size_t>(d.input_dim());
  Vec dx0(N * in_dim, 0.0);
  affine_back(c.x0.data(), N, in_dim, T[slot::kFuseW].v, H, dz, G[slot::kFuseW].v, &G[slot::kFuseB].v, dx0.data());
  const auto md = static_cast<std::size_t>(d.method_dim), bd = static_cast<std::size_t>(d.bits_dim),
             od = static_cast<std::size_t>(d.op_dim), kd = static_cast<std::size_t>(d.block_dim),
             sd = static_cast<std::size_t>(d.scalar_dim);
  auto& gsw = G[slot::kScalarW].v;
  auto& gsb = G[slot::kScalarB].v;
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = dx0.data() + n * in_dim;
    const auto ki = static_cast<std::size_t>(std::min(b.block[n], d.block_vocab - 1));
    auto add = [](const double* src, std::size_t len, double* dst) {
      for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
    };
    add(row, md, G[slot::kEmbMethod].v.data() + static_cast<std::size_t>(b.method[n]) * md);
    add(row + md, bd, G[slot::kEmbBits].v.data() + static_cast<std::size_t>(b.bits[n]) * bd);
    add(row + md + bd, od, G[slot::kEmbOp].v.data() + static_cast<std::size_t>(b.op[n]) * od);
    add(row + md + bd + od, kd, G[slot::kEmbBlock].v.data() + ki * kd);
    const double* srow = row + md + bd + od + kd;
    const double s0 = b.scalars[2 * n], s1 = b.scalars[2 * n + 1];
    for (std::size_t j = 0; j < sd; ++j) {
      gsw[j] += s0 * srow[j];
      gsw[sd + j] += s1 * srow[j];
      gsb[j] += srow[j];
    }
  }
}

void update_running_stats(SurrogateParams& p, const ForwardCache& c) {
  if (c.mode != Mode::Train) return;
  auto upd = [&](const BnCache& bc, std::size_t bi) {
    auto& rm = p.buffers[2 * bi].v;
    auto& rv = p.buffers[2 * bi + 1].v;
    const double n = static_cast<double>(bc.rows);
    const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
    for (std::size_t j = 0; j < rm.size(); ++j) {
      rm[j] = (1.0 - kBnMomentum) * rm[j] + kBnMomentum * bc.mean[j];
      rv[j] = (1.0 - kBnMomentum) * rv[j] + kBnMomentum * bc.var[j] * unbias;
    }
  };
  upd(c.bn0, 0);
  for (std::size_t l = 0; l < c.layer.size(); ++l) upd(c.layer[l].bn, l + 1);
}

double node_norm(const ForwardCache& c, std::size_t node, int m, int hidden) {
  if (m < 0 || m > c.layers_run) throw UsageError("node_norm: hop not computed");
  const auto H = static_cast<std::size_t>(hidden);
  return simd::kernels().sum_abs(c.h[static_cast<std::size_t>(m)].data() + node * H, H);
}

}  // namespace mixq::surrogate
