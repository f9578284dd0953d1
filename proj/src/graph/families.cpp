#include "mixq/graph/families.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

#include "mixq/core/errors.hpp"

namespace mixq::graph {
namespace {

class Builder {
 public:
  explicit Builder(std::string family) : g_(std::move(family)) {}

  std::size_t input(const std::string& id, std::size_t dim) {
    OpNode n;
    n.id = id;
    n.kind = NodeKind::Passthrough;
    n.compute = Compute::Input;
    n.op_type = "input";
    n.out_dim = dim;
    return g_.add_node(std::move(n));
  }

  std::size_t linear(const std::string& id, const std::string& op, int block, std::size_t out_dim,
                     std::initializer_list<std::size_t> in, bool relu = false) {
    OpNode n;
    n.id = id;
    n.kind = NodeKind::Weight;
    n.compute = Compute::Linear;
    n.op_type = op;
    n.block_index = block;
    n.out_dim = out_dim;
    n.relu_input = relu;
    n.weight_ref = id;
    return connect(g_.add_node(std::move(n)), in);
  }

  std::size_t pass(const std::string& id, const std::string& op, Compute c, int block, std::size_t out_dim,
                   std::initializer_list<std::size_t> in) {
    OpNode n;
    n.id = id;
    n.kind = NodeKind::Passthrough;
    n.compute = c;
    n.op_type = op;
    n.block_index = block;
    n.out_dim = out_dim;
    return connect(g_.add_node(std::move(n)), in);
  }

  void subgraph(const std::string& category, std::size_t root, int hop, std::vector<std::size_t> members) {
    SubgraphSpec s;
    s.category = category;
    s.root = root;
    s.hop = hop;
    std::sort(members.begin(), members.end());
    s.members = std::move(members);
    cat_.push_back(std::move(s));
  }

  BuiltGraph finish(const FamilyParams& p, std::uint64_t seed) {
    g_.finalize();
    for (auto& s : cat_)
      for (auto m : s.members)
        if (g_.node(m).is_weight()) s.weight_members.push_back(m);
    validate_catalog(g_, cat_);
    return BuiltGraph{std::move(g_), std::move(cat_), p, seed};
  }

 private:
  std::size_t connect(std::size_t v, std::initializer_list<std::size_t> in) {
    for (auto s : in) g_.add_edge(s, v);
    return v;
  }

  NetGraph g_;
  std::vector<SubgraphSpec> cat_;
};

BuiltGraph build_dit(const FamilyParams& p, std::uint64_t seed) {
  const std::size_t d = p.width;
  const int nb = p.blocks;
  Builder b("toy-dit");
  const auto x = b.input("x_in", d);
  const auto t = b.input("t_in", d);
  const auto c = b.input("c_in", d);

  const auto t1 = b.linear("t_embed.0", "t_embed", 0, d, {t});
  const auto t2 = b.linear("t_embed.1", "t_embed", 0, d, {t1}, true);
  const auto t3 = b.linear("t_embed.2", "t_embed", 0, d, {t2}, true);
  b.subgraph("t_embed", t3, 2, {t1, t2, t3});
  const auto c1 = b.linear("c_embed.0", "c_embed", 0, d, {c});
  const auto c2 = b.linear("c_embed.1", "c_embed", 0, d, {c1}, true);
  b.subgraph("c_embed", c2, 1, {c1, c2});
  const auto patch = b.linear("patchify", "patchify", 0, d, {x});
  b.subgraph("patchify", patch, 0, {patch});

  std::size_t h = patch;
  for (int i = 0; i < nb; ++i) {
    const std::string pre = "block" + std::to_string(i) + ".";
    const int bi = i + 1;
    const auto mod = b.pass(pre + "modulate", "modulate", Compute::Add, bi, d, {h, t3});
    const auto q = b.linear(pre + "attn.q", "attn_q", bi, d, {mod});
    const auto k = b.linear(pre + "attn.k", "attn_k", bi, d, {mod});
    const auto v = b.linear(pre + "attn.v", "attn_v", bi, d, {mod});
    const auto qk = b.pass(pre + "attn.scores", "attn_scores", Compute::AttnScores, bi, 0, {q, k});
    const auto av = b.pass(pre + "attn.apply", "attn_apply", Compute::AttnApply, bi, d, {qk, v});
    const auto o = b.linear(pre + "attn.out", "attn_out", bi, d, {av});
    b.subgraph("self_attn", o, 3, {mod, q, k, v, qk, av, o});
    const auto sa = b.pass(pre + "attn.residual", "residual", Compute::Add, bi, d, {h, o});

    const auto xq = b.linear(pre + "xattn.q", "xattn_q", bi, d, {sa});
    const auto xk = b.linear(pre + "xattn.k", "xattn_k", bi, d, {c2});
    const auto xv = b.linear(pre + "xattn.v", "xattn_v", bi, d, {c2});
    const auto xqk = b.pass(pre + "xattn.scores", "attn_scores", Compute::AttnScores, bi, 0, {xq, xk});
    b.subgraph("cross_attn_qk", xqk, 1, {xq, xk, xqk});
    const auto xav = b.pass(pre + "xattn.apply", "attn_apply", Compute::AttnApply, bi, d, {xqk, xv});
    const auto xo = b.linear(pre + "xattn.out", "xattn_out", bi, d, {xav});
    b.subgraph("cross_attn_vo", xo, 2, {xv, xav, xo});
    const auto ca = b.pass(pre + "xattn.residual", "residual", Compute::Add, bi, d, {sa, xo});

    const auto f1 = b.linear(pre + "ff.0", "ff_1", bi, 2 * d, {ca});
    const auto f2 = b.linear(pre + "ff.1", "ff_2", bi, d, {f1}, true);
    b.subgraph("feedforward", f2, 1, {f1, f2});
    h = b.pass(pre + "ff.residual", "residual", Compute::Add, bi, d, {ca, f2});
  }
  const auto norm = b.pass("norm_out", "norm_out", Compute::Norm, nb + 1, d, {h, t3});
  const auto out = b.linear("proj_out", "proj_out", nb + 1, d, {norm});
  b.subgraph("proj_out", out, 1, {norm, out});
  return b.finish(p, seed);
}

BuiltGraph build_unet(const FamilyParams& p, std::uint64_t seed) {
  const std::size_t d = p.width;
  const int levels = p.blocks;
  if (levels < 1) throw UsageError("toy-unet needs at least one level");
  Builder b("toy-unet");
  const auto x = b.input("x_in", d);
  const auto t = b.input("t_in", d);
  const auto c = b.input("c_in", d);

  const auto te1 = b.linear("t_embed.0", "t_embed", 0, d, {t});
  const auto te2 = b.linear("t_embed.1", "t_embed", 0, d, {te1}, true);
  b.subgraph("t_embed", te2, 1, {te1, te2});
  const auto cin = b.linear("conv_in", "conv_in", 0, d, {x});
  b.subgraph("conv_in", cin, 0, {cin});

  // Residual block with skip projections; the root is the closing add.
  auto skip_resblock = [&](const std::string& pre, int bi, std::size_t h, std::size_t skip_src, bool down) {
    std::size_t src = h;
    std::vector<std::size_t> members;
    if (down) {
      src = b.linear(pre + "down", "downsample", bi, d, {h});
      members.push_back(src);
    }
    const auto rin = skip_src == h ? b.linear(pre + "conv_in", "res_conv_in", bi, d, {src}, true)
                                   : b.linear(pre + "conv_in", "res_conv_in", bi, d, {src, skip_src}, true);
    const auto temb = b.linear(pre + "temb", "res_temb", bi, d, {te2}, true);
    const auto rout = b.linear(pre + "conv_out", "res_conv_out", bi, d, {rin, temb}, true);
    const auto s1 = b.linear(pre + "skip", "res_skip", bi, d, {src});
    members.insert(members.end(), {rin, temb, rout, s1});
    std::size_t add;
    if (skip_src != h) {
      const auto s2 = b.linear(pre + "skip2", "res_skip", bi, d, {skip_src});
      members.push_back(s2);
      add = b.pass(pre + "add", "residual", Compute::Add, bi, d, {rout, s1, s2});
    } else {
      add = b.pass(pre + "add", "residual", Compute::Add, bi, d, {rout, s1});
    }
    members.push_back(add);
    b.subgraph("resblock_skip", add, 2, members);
    return add;
  };

  std::size_t h = cin;
  std::vector<std::size_t> feats;
  for (int l = 0; l < levels; ++l) {
    const std::string pre = "down" + std::to_string(l) + ".";
    const int bi = l + 1;
    if (l == 0) {
      const auto rin = b.linear(pre + "res.conv_in", "res_conv_in", bi, d, {h}, true);
      const auto temb = b.linear(pre + "res.temb", "res_temb", bi, d, {te2}, true);
      const auto rout = b.linear(pre + "res.conv_out", "res_conv_out", bi, d, {rin, temb}, true);
      b.subgraph("resblock", rout, 1, {rin, temb, rout});
      h = b.pass(pre + "res.add", "residual", Compute::Add, bi, d, {h, rout});
    } else {
      h = skip_resblock(pre + "res.", bi, h, h, true);
      const std::string tp = pre + "tf.";
      const auto pin = b.linear(tp + "proj_in", "tf_proj_in", bi, d, {h});
      const auto q = b.linear(tp + "attn.q", "attn_q", bi, d, {pin});
      const auto k = b.linear(tp + "attn.k", "attn_k", bi, d, {pin});
      const auto v = b.linear(tp + "attn.v", "attn_v", bi, d, {pin});
      const auto qk = b.pass(tp + "attn.scores", "attn_scores", Compute::AttnScores, bi, 0, {q, k});
      const auto av = b.pass(tp + "attn.apply", "attn_apply", Compute::AttnApply, bi, d, {qk, v});
      const auto o = b.linear(tp + "attn.out", "attn_out", bi, d, {av});
      b.subgraph("self_attn", o, 3, {pin, q, k, v, qk, av, o});
      const auto sa = b.pass(tp + "attn.residual", "residual", Compute::Add, bi, d, {pin, o});
      const auto xq = b.linear(tp + "xattn.q", "xattn_q", bi, d, {sa});
      const auto xk = b.linear(tp + "xattn.k", "xattn_k", bi, d, {c});
      const auto xv = b.linear(tp + "xattn.v", "xattn_v", bi, d, {c});
      const auto xqk = b.pass(tp + "xattn.scores", "attn_scores", Compute::AttnScores, bi, 0, {xq, xk});
      const auto xav = b.pass(tp + "xattn.apply", "attn_apply", Compute::AttnApply, bi, d, {xqk, xv});
      const auto xo = b.linear(tp + "xattn.out", "xattn_out", bi, d, {xav});
      b.subgraph("cross_attn", xo, 3, {c, xq, xk, xv, xqk, xav, xo});
      const auto ca = b.pass(tp + "xattn.residual", "residual", Compute::Add, bi, d, {sa, xo});
      const auto f1 = b.linear(tp + "ff.0", "ff_1", bi, 2 * d, {ca});
      const auto f2 = b.linear(tp + "ff.1", "ff_2", bi, d, {f1}, true);
      b.subgraph("feedforward", f2, 1, {f1, f2});
      const auto fa = b.pass(tp + "ff.residual", "residual", Compute::Add, bi, d, {ca, f2});
      const auto pout = b.linear(tp + "proj_out", "tf_proj_out", bi, d, {fa});
      b.subgraph("tf_proj_out", pout, 0, {pout});
      h = b.pass(tp + "residual", "residual", Compute::Add, bi, d, {h, pout});
    }
    feats.push_back(h);
  }
  for (int l = levels - 1; l >= 0; --l) {
    const std::string pre = "up" + std::to_string(l) + ".";
    const int bi = levels + (levels - l);
    h = skip_resblock(pre + "res.", bi, h, feats[static_cast<std::size_t>(l)], false);
    if (l > 0) {
      const auto up = b.linear(pre + "upsample", "upsample", bi, d, {h});
      b.subgraph("upsample", up, 0, {up});
      h = up;
    }
  }
  const auto cout = b.linear("conv_out", "conv_out", 2 * levels + 1, d, {h}, true);
  b.subgraph("conv_out", cout, 0, {cout});
  return b.finish(p, seed);
}

}  // namespace

const std::vector<std::string>& known_families() {
  static const std::vector<std::string> f{"toy-dit", "toy-unet"};
  return f;
}

BuiltGraph build_graph(std::string_view family, const FamilyParams& params, std::uint64_t seed) {
  if (params.blocks < 0 || params.blocks > 64) throw UsageError("blocks must be in [0, 64]");
  if (params.width < 2 || params.width > 4096) throw UsageError("width must be in [2, 4096]");
  if (family == "toy-dit") return build_dit(params, seed);
  if (family == "toy-unet") return build_unet(params, seed);
  throw UsageError("unknown family '" + std::string(family) + "' (expected toy-dit or toy-unet)");
}

void validate_catalog(const NetGraph& g, const std::vector<SubgraphSpec>& catalog) {
  std::vector<int> owner(g.size(), -1);
  for (std::size_t ci = 0; ci < catalog.size(); ++ci) {
    const auto& s = catalog[ci];
    if (s.root >= g.size()) throw DataError("catalog: root out of range");
    if (s.hop < 0) throw DataError("catalog: negative hop");
    if (!std::is_sorted(s.members.begin(), s.members.end()) ||
        std::adjacent_find(s.members.begin(), s.members.end()) != s.members.end())
      throw DataError("catalog: members must be sorted and unique");
    if (!std::binary_search(s.members.begin(), s.members.end(), s.root))
      throw DataError("catalog: root of '" + s.category + "' is not a member");
    const auto hood = m_hop_neighborhood(g, s.root, s.hop);
    if (!std::includes(hood.begin(), hood.end(), s.members.begin(), s.members.end()))
      throw DataError("catalog: '" + s.category + "' at " + g.node(s.root).id + " exceeds its hop neighborhood");
    std::vector<std::size_t> w;
    for (auto m : s.members)
      if (g.node(m).is_weight()) w.push_back(m);
    if (w != s.weight_members) throw DataError("catalog: weight_members inconsistent for " + g.node(s.root).id);
    for (auto m : w) {
      if (owner[m] >= 0) throw DataError("catalog: weight node '" + g.node(m).id + "' in two subgraphs");
      owner[m] = static_cast<int>(ci);
    }
  }
  for (auto wn : g.weight_nodes())
    if (owner[wn] < 0) throw DataError("catalog: weight node '" + g.node(wn).id + "' not covered");
}

std::vector<int> catalog_hops(const std::vector<SubgraphSpec>& catalog) {
  std::set<int> s;
  for (const auto& c : catalog) s.insert(c.hop);
  return {s.begin(), s.end()};
}

}  // namespace mixq::graph
