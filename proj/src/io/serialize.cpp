#include "mixq/io/serialize.hpp"

#include <charconv>
#include <limits>
#include <cstdio>
#include <sstream>

#include "mixq/core/errors.hpp"
#include "mixq/io/files.hpp"
#include "mixq/io/tensor_dump.hpp"

namespace mixq::io {
namespace {

using graph::NetGraph;

// nlohmann errors become DataError with the artifact name attached.
template <class F>
auto guarded(std::string_view what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

json with_schema(std::string_view kind) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

std::vector<std::string> ids(const NetGraph& g, const std::vector<std::size_t>& nodes) {
  std::vector<std::string> out;
  for (auto v : nodes) out.push_back(g.node(v).id);
  return out;
}

std::vector<std::size_t> indices(const NetGraph& g, const json& arr) {
  std::vector<std::size_t> out;
  for (const auto& s : arr) out.push_back(g.index_of(s.get<std::string>()));
  return out;
}

json choice_json(graph::QuantChoice c) {
  return {{"method", std::string(quant::to_string(c.method))}, {"bits", c.bits}};
}

graph::QuantChoice choice_from(const json& j) {
  graph::QuantChoice c;
  c.method = quant::parse_method(j.at("method").get<std::string>());
  c.bits = j.at("bits").get<int>();
  if (c.bits != 3 && c.bits != 4) throw DataError("bit width must be 3 or 4");
  return c;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void check_schema(const json& j, std::string_view kind) {
  if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_string())
    throw DataError("missing schema_version");
  const auto v = j["schema_version"].get<std::string>();
  int major = -1;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), major);
  if (r.ec != std::errc() || (r.ptr != v.data() + v.size() && *r.ptr != '.'))
    throw DataError("malformed schema_version '" + v + "'");
  if (major != kSchemaMajor)
    throw DataError("unsupported schema major version " + std::to_string(major) + " (expected " +
                    std::to_string(kSchemaMajor) + ")");
  if (!kind.empty() && (!j.contains("kind") || j["kind"] != kind))
    throw DataError("expected a '" + std::string(kind) + "' document");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json graph_to_json(const graph::BuiltGraph& b) {
  const auto& g = b.graph;
  json j = with_schema("graph");
  j["family"] = g.family();
  j["params"] = {{"blocks", b.params.blocks}, {"width", b.params.width}};
  j["seed"] = b.seed;
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"kind", std::string(graph::to_string(n.kind))},
                     {"compute", std::string(graph::to_string(n.compute))},
                     {"op_type", n.op_type},
                     {"block", n.block_index},
                     {"out_dim", n.out_dim},
                     {"relu_input", n.relu_input},
                     {"weight_ref", n.weight_ref}});
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& [s, d] : g.edges()) edges.push_back({g.node(s).id, g.node(d).id});
  j["edges"] = std::move(edges);
  json cat = json::array();
  for (const auto& s : b.catalog) {
    cat.push_back({{"category", s.category},
                   {"root", g.node(s.root).id},
                   {"hop", s.hop},
                   {"members", ids(g, s.members)},
                   {"weight_members", ids(g, s.weight_members)}});
  }
  j["catalog"] = std::move(cat);
  j["weight_nodes"] = g.weight_nodes().size();
  return j;
}

graph::BuiltGraph graph_from_json(const json& j) {
  check_schema(j, "graph");
  return guarded("graph file", [&] {
    graph::BuiltGraph b;
    b.graph = NetGraph(j.at("family").get<std::string>());
    b.params.blocks = j.at("params").at("blocks").get<int>();
    b.params.width = j.at("params").at("width").get<std::size_t>();
    b.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& n : j.at("nodes")) {
      graph::OpNode o;
      o.id = n.at("id").get<std::string>();
      o.kind = graph::parse_node_kind(n.at("kind").get<std::string>());
      o.compute = graph::parse_compute(n.at("compute").get<std::string>());
      o.op_type = n.at("op_type").get<std::string>();
      o.block_index = n.at("block").get<int>();
      o.out_dim = n.at("out_dim").get<std::size_t>();
      o.relu_input = n.at("relu_input").get<bool>();
      o.weight_ref = n.at("weight_ref").get<std::string>();
      b.graph.add_node(std::move(o));
    }
    for (const auto& e : j.at("edges")) b.graph.add_edge(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    b.graph.finalize();
    for (const auto& s : j.at("catalog")) {
      graph::SubgraphSpec sg;
      sg.category = s.at("category").get<std::string>();
      sg.root = b.graph.index_of(s.at("root").get<std::string>());
      sg.hop = s.at("hop").get<int>();
      sg.members = indices(b.graph, s.at("members"));
      sg.weight_members = indices(b.graph, s.at("weight_members"));
      b.catalog.push_back(std::move(sg));
    }
    graph::validate_catalog(b.graph, b.catalog);
    return b;
  });
}

json config_to_json(const NetGraph& g, const graph::QuantConfig& c) {
  json j = with_schema("quant_config");
  json a = json::object();
  for (const auto& [id, ch] : graph::config_to_map(g, c)) a[id] = choice_json(ch);
  j["assignments"] = std::move(a);
  j["key"] = c.key();
  return j;
}

graph::QuantConfig config_from_json(const NetGraph& g, const json& j) {
  check_schema(j, "quant_config");
  return guarded("configuration", [&] {
    std::map<std::string, graph::QuantChoice> m;
    for (const auto& [id, v] : j.at("assignments").items()) m[id] = choice_from(v);
    return graph::config_from_map(g, m);
  });
}

json record_to_json(const NetGraph& g, const oracle::ConfigRecord& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["index"] = r.timestamp;
  j["seed"] = r.seed;
  j["mode"] = std::string(oracle::to_string(r.mode));
  j["lambda"] = r.lambda;
  j["failed"] = r.failed;
  // Non-finite losses are not representable in JSON; failed records store null.
  j["oracle_loss"] = r.failed ? json(nullptr) : json(r.oracle_loss);
  j["y"] = r.failed ? json(nullptr) : json(r.y);
  j["avg_bits"] = r.avg_bits;
  j["avg_bits_overhead"] = r.avg_bits_overhead;
  j["epsilons"] = r.epsilons;
  j["config"] = r.config.key();
  return j;
}

oracle::ConfigRecord record_from_json(const NetGraph& g, const json& j) {
  check_schema(j);
  return guarded("corpus record", [&] {
    oracle::ConfigRecord r;
    r.timestamp = j.at("index").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = oracle::parse_target_mode(j.at("mode").get<std::string>());
    r.lambda = j.at("lambda").get<double>();
    r.failed = j.at("failed").get<bool>();
    r.oracle_loss = r.failed ? std::numeric_limits<double>::quiet_NaN() : j.at("oracle_loss").get<double>();
    r.y = r.failed ? std::numeric_limits<double>::quiet_NaN() : j.at("y").get<double>();
    r.avg_bits = j.at("avg_bits").get<double>();
    r.avg_bits_overhead = j.at("avg_bits_overhead").get<double>();
    r.epsilons = j.at("epsilons").get<std::vector<double>>();
    const auto key = j.at("config").get<std::string>();
    if (key.size() != g.weight_nodes().size())
      throw DataError("record configuration has " + std::to_string(key.size()) + " entries, graph has " +
                      std::to_string(g.weight_nodes().size()) + " weight nodes");
    for (char c : key) {
      if (c < '0' || c >= '0' + graph::kNumChoices) throw DataError("bad configuration key '" + key + "'");
      r.config.choices.push_back(graph::QuantChoice::from_index(c - '0'));
    }
    if (r.epsilons.size() != key.size()) throw DataError("record epsilons do not match the configuration");
    return r;
  });
}

std::string corpus_to_jsonl(const NetGraph& g, const std::vector<oracle::ConfigRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(g, r).dump();
    out += '\n';
  }
  return out;
}

std::vector<oracle::ConfigRecord> corpus_from_jsonl(const NetGraph& g, std::string_view text) {
  std::vector<oracle::ConfigRecord> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(record_from_json(g, guarded("corpus", [&] { return json::parse(line); })));
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json train_spec_to_json(const surrogate::TrainSpec& s) {
  const auto& d = s.dims;
  return {{"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"lr", s.lr},
          {"weight_decay", s.weight_decay},
          {"rank_loss", std::string(surrogate::to_string(s.rank_loss))},
          {"active_hops", s.active_hops},
          {"tau", s.tau},
          {"seed", s.seed},
          {"update_running_stats", s.update_running_stats},
          {"dims",
           {{"hidden", d.hidden},
            {"layers", d.layers},
            {"method_dim", d.method_dim},
            {"bits_dim", d.bits_dim},
            {"op_dim", d.op_dim},
            {"block_dim", d.block_dim},
            {"scalar_dim", d.scalar_dim},
            {"head_mid", d.head_mid},
            {"block_vocab", d.block_vocab}}}};
}

surrogate::TrainSpec train_spec_from_json(const json& j) {
  return guarded("training spec", [&] {
    surrogate::TrainSpec s;
    s.epochs = j.at("epochs").get<int>();
    s.batch_size = j.at("batch_size").get<std::size_t>();
    s.lr = j.at("lr").get<double>();
    s.weight_decay = j.at("weight_decay").get<double>();
    s.rank_loss = surrogate::parse_rank_loss(j.at("rank_loss").get<std::string>());
    s.active_hops = j.at("active_hops").get<std::vector<int>>();
    s.tau = j.at("tau").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.update_running_stats = j.at("update_running_stats").get<bool>();
    const auto& d = j.at("dims");
    s.dims.hidden = d.at("hidden").get<int>();
    s.dims.layers = d.at("layers").get<int>();
    s.dims.method_dim = d.at("method_dim").get<int>();
    s.dims.bits_dim = d.at("bits_dim").get<int>();
    s.dims.op_dim = d.at("op_dim").get<int>();
    s.dims.block_dim = d.at("block_dim").get<int>();
    s.dims.scalar_dim = d.at("scalar_dim").get<int>();
    s.dims.head_mid = d.at("head_mid").get<int>();
    s.dims.block_vocab = d.at("block_vocab").get<int>();
    return s;
  });
}

namespace {

std::string log_csv(const std::vector<surrogate::EpochLog>& log, const std::vector<int>& hops) {
  std::string s = "epoch,lr,orig";
  for (int m : hops) s += ",rank_hop" + std::to_string(m);
  s += '\n';
  for (const auto& e : log) {
    s += std::to_string(e.epoch) + ',' + fmt(e.lr) + ',' + fmt(e.orig);
    for (double r : e.rank) s += ',' + fmt(r);
    s += '\n';
  }
  return s;
}

std::vector<surrogate::EpochLog> parse_log_csv(std::string_view text) {
  std::vector<surrogate::EpochLog> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc()) throw DataError("malformed training log line '" + line + "'");
      f.push_back(v);
    }
    if (f.size() < 3) throw DataError("malformed training log line '" + line + "'");
    surrogate::EpochLog e;
    e.epoch = static_cast<int>(f[0]);
    e.lr = f[1];
    e.orig = f[2];
    e.rank.assign(f.begin() + 3, f.end());
    out.push_back(std::move(e));
  }
  return out;
}

json tensor_shapes(const std::vector<surrogate::Tensor>& ts) {
  json a = json::array();
  for (const auto& t : ts) a.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  return a;
}

std::vector<surrogate::Tensor> shapes_from(const json& a) {
  std::vector<surrogate::Tensor> out;
  for (const auto& t : a) {
    surrogate::Tensor x;
    x.name = t.at("name").get<std::string>();
    x.rows = t.at("rows").get<std::size_t>();
    x.cols = t.at("cols").get<std::size_t>();
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

void save_ensemble(const std::filesystem::path& dir, const ensemble::Ensemble& ens) {
  json j = with_schema("ensemble");
  j["spec"] = train_spec_to_json(ens.spec);
  j["folds"] = {{"n", ens.plan.n}, {"k", ens.plan.k}, {"seed", ens.plan.seed}};
  j["active_hops"] = ens.active_hops;
  j["warnings"] = ens.warnings;
  json members = json::array();
  for (const auto& m : ens.members) {
    TensorDump d;
    for (const auto* group : {&m.params.tensors, &m.params.buffers})
      for (const auto& t : *group) d.data.insert(d.data.end(), t.v.begin(), t.v.end());
    d.shape = {d.data.size()};
    const auto bin = encode_tensor(d);
    const auto log = log_csv(m.log, ens.active_hops);
    const std::string stem = "member" + std::to_string(m.fold);
    write_atomic(dir / (stem + ".bin"), bin);
    write_atomic(dir / (stem + "_log.csv"), log);
    json hops = json::array();
    for (const auto& h : m.hops)
      hops.push_back({{"hop", h.hop},
                      {"srcc", h.srcc},
                      {"ndcg", h.ndcg},
                      {"weight", h.weight},
                      {"mean", h.mean},
                      {"std", h.std},
                      {"usable", h.usable}});
    members.push_back({{"fold", m.fold},
                       {"seed", m.seed},
                       {"scaler", {{"mean", m.scaler.mean}, {"std", m.scaler.std}}},
                       {"pred_srcc", m.pred_srcc},
                       {"hops", std::move(hops)},
                       {"tensors", tensor_shapes(m.params.tensors)},
                       {"buffers", tensor_shapes(m.params.buffers)},
                       {"params_file", stem + ".bin"},
                       {"params_sha256", sha256_hex(bin)},
                       {"log_file", stem + "_log.csv"},
                       {"log_sha256", sha256_hex(log)}});
  }
  j["members"] = std::move(members);
  write_atomic(dir / "manifest.json", dump(j));
}

ensemble::Ensemble load_ensemble(const std::filesystem::path& dir) {
  const json j = guarded("ensemble manifest", [&] { return json::parse(read_file(dir / "manifest.json")); });
  check_schema(j, "ensemble");
  return guarded("ensemble manifest", [&] {
    ensemble::Ensemble ens;
    ens.spec = train_spec_from_json(j.at("spec"));
    const auto& f = j.at("folds");
    ens.plan = ensemble::make_folds(f.at("n").get<std::size_t>(), f.at("k").get<std::size_t>(),
                                    f.at("seed").get<std::uint64_t>());
    ens.active_hops = j.at("active_hops").get<std::vector<int>>();
    ens.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& mj : j.at("members")) {
      ensemble::EnsembleMember m;
      m.fold = mj.at("fold").get<std::size_t>();
      m.seed = mj.at("seed").get<std::uint64_t>();
      m.scaler.mean = mj.at("scaler").at("mean").get<double>();
      m.scaler.std = mj.at("scaler").at("std").get<double>();
      m.pred_srcc = mj.at("pred_srcc").get<double>();
      for (const auto& h : mj.at("hops")) {
        ensemble::HopMetrics hm;
        hm.hop = h.at("hop").get<int>();
        hm.srcc = h.at("srcc").get<double>();
        hm.ndcg = h.at("ndcg").get<double>();
        hm.weight = h.at("weight").get<double>();
        hm.mean = h.at("mean").get<double>();
        hm.std = h.at("std").get<double>();
        hm.usable = h.at("usable").get<bool>();
        m.hops.push_back(hm);
      }
      const auto bin = read_file(dir / mj.at("params_file").get<std::string>());
      if (sha256_hex(bin) != mj.at("params_sha256").get<std::string>())
        throw DataError("digest mismatch for " + mj.at("params_file").get<std::string>());
      const auto log = read_file(dir / mj.at("log_file").get<std::string>());
      if (sha256_hex(log) != mj.at("log_sha256").get<std::string>())
        throw DataError("digest mismatch for " + mj.at("log_file").get<std::string>());
      const auto d = decode_tensor(bin);
      m.params.dims = ens.spec.dims;
      m.params.tensors = shapes_from(mj.at("tensors"));
      m.params.buffers = shapes_from(mj.at("buffers"));
      std::size_t pos = 0;
      for (auto* group : {&m.params.tensors, &m.params.buffers}) {
        for (auto& t : *group) {
          const std::size_t n = t.rows * t.cols;
          if (pos + n > d.data.size()) throw DataError("parameter dump shorter than its manifest");
          t.v.assign(d.data.begin() + static_cast<std::ptrdiff_t>(pos),
                     d.data.begin() + static_cast<std::ptrdiff_t>(pos + n));
          pos += n;
        }
      }
      if (pos != d.data.size()) throw DataError("parameter dump longer than its manifest");
      m.log = parse_log_csv(log);
      ens.members.push_back(std::move(m));
    }
    if (ens.members.empty()) throw DataError("ensemble has no members");
    return ens;
  });
}

std::string score_rows_csv(const std::vector<ensemble::ScoreRow>& rows) {
  std::string s = "level,target,category,candidate,hop,member,raw,standardized,weighted\n";
  for (const auto& r : rows) {
    s += r.level + ',' + csv_field(r.target) + ',' + csv_field(r.category) + ',' + csv_field(r.candidate) + ',' +
         std::to_string(r.hop) + ',' + std::to_string(r.member) + ',' + fmt(r.raw) + ',' + fmt(r.standardized) +
         ',' + fmt(r.weighted) + '\n';
  }
  return s;
}

std::string frontier_csv(const std::vector<oracle::ConfigRecord>& records, const std::vector<std::size_t>& frontier) {
  std::string s = "index,oracle_loss,avg_bits,y,config\n";
  for (auto i : frontier) {
    const auto& r = records.at(i);
    s += std::to_string(r.timestamp) + ',' + fmt(r.oracle_loss) + ',' + fmt(r.avg_bits) + ',' + fmt(r.y) + ',' +
         r.config.key() + '\n';
  }
  return s;
}

json run_manifest_to_json(const RunManifest& m) {
  json j = with_schema("run");
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["flags"] = m.flags;
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["wall_seconds"] = m.wall_seconds;
  return j;
}

}  // namespace mixq::io
