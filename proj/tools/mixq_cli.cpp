// mixq: command-line front end for the mixed-precision search pipeline.
//
//   mixq build-graph  --family toy-dit --out graph.json
//   mixq corpus       --graph graph.json --n-configs 400 --out corpus.jsonl
//   mixq train        --graph graph.json --corpus corpus.jsonl --out ens/
//   mixq build-config --graph graph.json --ensemble ens/ --level block --out cfg/
//   mixq eval         --graph graph.json --config cfg/config.json --out rec.json
//   mixq pareto       --graph graph.json --corpus corpus.jsonl --out frontier.csv
//
// Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixq/core/errors.hpp"
#include "mixq/ensemble/builder.hpp"
#include "mixq/ensemble/ensemble.hpp"
#include "mixq/graph/families.hpp"
#include "mixq/io/files.hpp"
#include "mixq/io/serialize.hpp"
#include "mixq/oracle/corpus.hpp"
#include "mixq/oracle/pareto.hpp"
#include "mixq/sampler/sampler.hpp"
#include "mixq/version.hpp"

namespace fs = std::filesystem;
using namespace mixq;
using io::json;

namespace {

struct Options {
  std::string family = "toy-dit";
  int blocks = 2;
  std::size_t width = 32;
  std::uint64_t seed = 0;
  std::size_t n_configs = 400;
  std::optional<double> lambda;
  std::string mode = "pure";
  std::string rank_loss = "hybrid";
  std::string hops;
  std::size_t folds = 5;
  std::string level = "block";
  int epochs = 10000;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::string out;
  std::string graph, corpus, ensemble, config;
};

struct Loaded {
  graph::BuiltGraph built;
  std::string digest;
};

Loaded load_graph(const std::string& path) {
  const auto text = io::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("graph file '" + path + "': " + e.what());
  }
  return {io::graph_from_json(j), io::sha256_hex(text)};
}

// Rebuilds the toy model named by a graph file and checks that its
// structure matches the file.
oracle::ToyModel model_for(const graph::BuiltGraph& b) {
  auto model = oracle::build_toy_model(b.graph.family(), b.params, b.seed);
  graph::BuiltGraph rebuilt{*model.graph, model.catalog, model.params, model.seed};
  if (io::graph_to_json(rebuilt) != io::graph_to_json(b))
    throw DataError("graph file does not match the '" + b.graph.family() + "' family at these parameters");
  return model;
}

std::vector<int> parse_hops(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(tok, &pos);
      if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--hops expects a comma-separated list of non-negative integers, got '" + s + "'");
    }
  }
  return out;
}

void require(const std::string& v, const char* flag) {
  if (v.empty()) throw UsageError(std::string(flag) + " is required");
}

class Run {
 public:
  Run(std::string command, const Options& o) : start_(std::chrono::steady_clock::now()) {
    m_.tool_version = kVersion;
    m_.command = std::move(command);
    m_.seeds["seed"] = o.seed;
  }
  void flag(const std::string& k, const std::string& v) { m_.flags[k] = v; }
  void input(const std::string& path, const std::string& digest) { m_.inputs[path] = digest; }
  void output(const fs::path& p, const std::string& data) {
    io::write_atomic(p, data);
    m_.outputs[p.string()] = io::sha256_hex(data);
  }
  void recorded(const fs::path& p) { m_.outputs[p.string()] = io::sha256_file(p); }
  // Provenance goes next to the outputs; it carries the wall time and is
  // therefore excluded from determinism checks.
  void finish(const fs::path& manifest) {
    m_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_atomic(manifest, io::dump(io::run_manifest_to_json(m_)));
  }

 private:
  io::RunManifest m_;
  std::chrono::steady_clock::time_point start_;
};

fs::path sidecar(const fs::path& out) {
  auto p = out;
  p += ".run.json";
  return p;
}

void cmd_build_graph(const Options& o) {
  require(o.out, "--out");
  const auto b = graph::build_graph(o.family, {o.blocks, o.width}, o.seed);
  Run run("build-graph", o);
  run.flag("family", o.family);
  run.flag("blocks", std::to_string(o.blocks));
  run.flag("width", std::to_string(o.width));
  run.output(o.out, io::dump(io::graph_to_json(b)));
  run.finish(sidecar(o.out));
  std::cout << b.graph.family() << ": " << b.graph.size() << " nodes, " << b.graph.weight_nodes().size()
            << " weight layers, " << b.catalog.size() << " subgraphs, search space "
            << graph::search_space_size(b.graph) << "\n";
}

void cmd_sample(const Options& o) {
  require(o.graph, "--graph");
  require(o.out, "--out");
  const auto g = load_graph(o.graph);
  sampler::SampleSpec spec;
  spec.n_configs = o.n_configs;
  spec.seed = o.seed;
  const auto configs = sampler::sample_corpus(g.built.graph, spec);
  std::string text;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    json j;
    j["schema_version"] = io::kSchemaVersion;
    j["index"] = i;
    j["p"] = configs[i].p;
    j["config"] = configs[i].config.key();
    text += j.dump() + "\n";
  }
  Run run("sample", o);
  run.input(o.graph, g.digest);
  run.flag("n-configs", std::to_string(o.n_configs));
  run.output(o.out, text);
  run.finish(sidecar(o.out));
  std::cout << configs.size() << " configurations\n";
}

void cmd_corpus(const Options& o) {
  require(o.graph, "--graph");
  require(o.out, "--out");
  if (fs::exists(o.out)) throw UsageError("'" + o.out + "' exists; corpora are immutable, choose a new path");
  const auto g = load_graph(o.graph);
  const auto model = model_for(g.built);
  sampler::SampleSpec spec;
  spec.n_configs = o.n_configs;
  spec.seed = o.seed;
  const auto mode = oracle::parse_target_mode(o.mode);
  const auto records = oracle::generate_corpus(model, spec, o.lambda, mode);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed;
  if (failed) std::cerr << "warning: " << failed << " configurations gave a non-finite loss\n";
  Run run("corpus", o);
  run.input(o.graph, g.digest);
  run.flag("n-configs", std::to_string(o.n_configs));
  run.flag("mode", o.mode);
  run.flag("lambda", o.lambda ? std::to_string(*o.lambda) : "auto");
  run.output(o.out, io::corpus_to_jsonl(g.built.graph, records));
  run.finish(sidecar(o.out));
  std::cout << records.size() << " records, lambda " << (records.empty() ? 0.0 : records.front().lambda)
            << ", baseline loss " << model.baseline_loss << "\n";
}

std::vector<oracle::ConfigRecord> load_corpus(const std::string& path, const graph::NetGraph& g, Run& run) {
  const auto text = io::read_file(path);
  run.input(path, io::sha256_hex(text));
  return io::corpus_from_jsonl(g, text);
}

void cmd_train(const Options& o) {
  require(o.graph, "--graph");
  require(o.corpus, "--corpus");
  require(o.out, "--out");
  const auto g = load_graph(o.graph);
  Run run("train", o);
  run.input(o.graph, g.digest);
  const auto model = model_for(g.built);
  const auto records = load_corpus(o.corpus, g.built.graph, run);
  surrogate::TrainSpec spec;
  spec.epochs = o.epochs;
  spec.batch_size = o.batch;
  spec.lr = o.lr;
  spec.rank_loss = surrogate::parse_rank_loss(o.rank_loss);
  spec.active_hops = parse_hops(o.hops);
  spec.seed = o.seed;
  for (int m : spec.active_hops)
    if (m > spec.dims.layers) throw UsageError("--hops entries must be <= " + std::to_string(spec.dims.layers));
  const auto samples = ensemble::make_samples(model, records, spec.dims.layers);
  const auto plan = ensemble::make_folds(samples.size(), o.folds, o.seed);
  const auto ens = ensemble::train_ensemble(samples, spec, plan);
  for (const auto& w : ens.warnings) std::cerr << "warning: " << w << "\n";
  io::save_ensemble(o.out, ens);
  run.flag("rank-loss", o.rank_loss);
  run.flag("hops", o.hops);
  run.flag("folds", std::to_string(o.folds));
  run.flag("epochs", std::to_string(o.epochs));
  run.flag("batch", std::to_string(o.batch));
  run.flag("lr", std::to_string(o.lr));
  const fs::path dir(o.out);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "run.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) run.recorded(f);
  run.finish(dir / "run.json");
  for (const auto& m : ens.members) {
    std::cout << "member " << m.fold << ":";
    for (const auto& h : m.hops)
      std::printf(" hop%d srcc %.3f ndcg %.3f w %.3f;", h.hop, h.srcc, h.ndcg, h.weight);
    std::cout << "\n";
  }
}

void cmd_build_config(const Options& o) {
  require(o.graph, "--graph");
  require(o.ensemble, "--ensemble");
  require(o.out, "--out");
  if (o.level != "op" && o.level != "block") throw UsageError("--level must be op or block");
  const auto g = load_graph(o.graph);
  Run run("build-config", o);
  run.input(o.graph, g.digest);
  run.input(o.ensemble + "/manifest.json", io::sha256_file(fs::path(o.ensemble) / "manifest.json"));
  const auto model = model_for(g.built);
  const auto ens = io::load_ensemble(o.ensemble);
  const auto base = ensemble::ScoringBase::from(model);
  const fs::path dir(o.out);
  graph::QuantConfig config;
  std::vector<ensemble::ScoreRow> rows;
  std::string summary;
  const auto& G = *model.graph;
  if (o.level == "op") {
    auto res = ensemble::build_op_level(base, ens);
    config = res.config;
    rows = std::move(res.rows);
    summary = "node,candidate,score\n";
    const auto& wn = G.weight_nodes();
    for (std::size_t s = 0; s < wn.size(); ++s)
      for (int c = 0; c < graph::kNumChoices; ++c) {
        std::ostringstream line;
        line.precision(17);
        line << G.node(wn[s]).id << ',' << ensemble::choice_label(graph::QuantChoice::from_index(c)) << ','
             << res.scores[s][c] << '\n';
        summary += line.str();
      }
  } else {
    auto res = ensemble::build_block_level(base, ens);
    config = res.config;
    rows = std::move(res.rows);
    summary = "category,root,hop,candidates,best,score\n";
    for (const auto& sc : res.subgraphs) {
      const auto& sg = model.catalog[sc.index];
      std::ostringstream line;
      line.precision(17);
      line << sg.category << ',' << G.node(sg.root).id << ',' << sg.hop << ',' << sc.candidates << ',';
      for (std::size_t j = 0; j < sc.best.size(); ++j)
        line << (j ? ";" : "") << G.node(sg.weight_members[j]).id << '='
             << ensemble::choice_label(graph::QuantChoice::from_index(sc.best[j]));
      line << ',' << sc.score << '\n';
      summary += line.str();
    }
  }
  run.flag("level", o.level);
  run.output(dir / "config.json", io::dump(io::config_to_json(G, config)));
  run.output(dir / (o.level + "_scores.csv"), summary);
  run.output(dir / (o.level + "_member_scores.csv"), io::score_rows_csv(rows));
  run.finish(dir / "run.json");
  std::printf("%s-level configuration: average bits %.4f, predicted key %s\n", o.level.c_str(),
              graph::average_bits(G, config), config.key().c_str());
}

void cmd_eval(const Options& o) {
  require(o.graph, "--graph");
  require(o.config, "--config");
  require(o.out, "--out");
  const auto g = load_graph(o.graph);
  Run run("eval", o);
  run.input(o.graph, g.digest);
  const auto ctext = io::read_file(o.config);
  run.input(o.config, io::sha256_hex(ctext));
  json cj;
  try {
    cj = json::parse(ctext);
  } catch (const json::exception& e) {
    throw DataError("configuration file: " + std::string(e.what()));
  }
  const auto model = model_for(g.built);
  const auto config = io::config_from_json(*model.graph, cj);
  const auto mode = oracle::parse_target_mode(o.mode);
  if (mode == oracle::TargetMode::Constrained && !o.lambda) throw UsageError("--lambda is required with --mode constrained");
  const auto rec = oracle::evaluate_config(model, config, o.lambda.value_or(0.0), mode);
  auto j = io::record_to_json(*model.graph, rec);
  j["kind"] = "eval_record";
  j["baseline_loss"] = model.baseline_loss;
  run.flag("mode", o.mode);
  run.output(o.out, io::dump(j));
  run.finish(sidecar(o.out));
  std::printf("oracle loss %.6g, average bits %.4f (%.4f with overhead), y %.6g\n", rec.oracle_loss, rec.avg_bits,
              rec.avg_bits_overhead, rec.y);
}

void cmd_pareto(const Options& o) {
  require(o.graph, "--graph");
  require(o.corpus, "--corpus");
  require(o.out, "--out");
  const auto g = load_graph(o.graph);
  Run run("pareto", o);
  run.input(o.graph, g.digest);
  const auto records = load_corpus(o.corpus, g.built.graph, run);
  std::vector<oracle::LossBits> pts;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].failed) continue;
    pts.push_back({records[i].oracle_loss, records[i].avg_bits});
    idx.push_back(i);
  }
  std::vector<std::size_t> frontier;
  for (auto k : oracle::pareto_frontier(pts)) frontier.push_back(idx[k]);
  run.output(o.out, io::frontier_csv(records, frontier));
  run.finish(sidecar(o.out));
  std::cout << frontier.size() << " frontier points of " << pts.size() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision weight quantization search on toy denoiser graphs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto add_graph_flags = [&](CLI::App* c) {
    c->add_option("--family", o.family, "toy-dit or toy-unet")->capture_default_str();
    c->add_option("--blocks", o.blocks, "transformer blocks (toy-dit) or levels (toy-unet)")->capture_default_str();
    c->add_option("--width", o.width, "hidden width")->capture_default_str();
  };
  auto* bg = app.add_subcommand("build-graph", "Build a toy network graph and its subgraph catalog");
  add_graph_flags(bg);
  bg->add_option("--seed", o.seed, "seed of the model weights")->capture_default_str();
  bg->add_option("--out", o.out, "output graph JSON");

  auto* sm = app.add_subcommand("sample", "Sample random quantization configurations");
  sm->add_option("--graph", o.graph, "graph JSON");
  sm->add_option("--n-configs", o.n_configs)->capture_default_str();
  sm->add_option("--seed", o.seed)->capture_default_str();
  sm->add_option("--out", o.out, "output JSONL");

  auto* co = app.add_subcommand("corpus", "Sample configurations and evaluate them on the toy oracle");
  co->add_option("--graph", o.graph, "graph JSON");
  co->add_option("--n-configs", o.n_configs)->capture_default_str();
  co->add_option("--seed", o.seed, "sampling seed")->capture_default_str();
  co->add_option("--lambda", o.lambda, "bit penalty (default: a quarter of the loss range)");
  co->add_option("--mode", o.mode, "pure or constrained")->capture_default_str();
  co->add_option("--out", o.out, "output JSONL (must not exist)");

  auto* tr = app.add_subcommand("train", "Train a K-fold surrogate ensemble");
  tr->add_option("--graph", o.graph, "graph JSON");
  tr->add_option("--corpus", o.corpus, "corpus JSONL");
  tr->add_option("--rank-loss", o.rank_loss, "srcc, ndcg or hybrid")->capture_default_str();
  tr->add_option("--hops", o.hops, "active hop levels, e.g. 0,1,2 (default: 0 plus the catalog hops)");
  tr->add_option("--folds", o.folds)->capture_default_str();
  tr->add_option("--epochs", o.epochs)->capture_default_str();
  tr->add_option("--batch", o.batch)->capture_default_str();
  tr->add_option("--lr", o.lr)->capture_default_str();
  tr->add_option("--seed", o.seed)->capture_default_str();
  tr->add_option("--out", o.out, "output ensemble directory");

  auto* bc = app.add_subcommand("build-config", "Build an op-level or block-level configuration");
  bc->add_option("--graph", o.graph, "graph JSON");
  bc->add_option("--ensemble", o.ensemble, "ensemble directory");
  bc->add_option("--level", o.level, "op or block")->capture_default_str();
  bc->add_option("--out", o.out, "output directory");

  auto* ev = app.add_subcommand("eval", "Evaluate one configuration on the toy oracle");
  ev->add_option("--graph", o.graph, "graph JSON");
  ev->add_option("--config", o.config, "configuration JSON");
  ev->add_option("--lambda", o.lambda, "bit penalty");
  ev->add_option("--mode", o.mode, "pure or constrained")->capture_default_str();
  ev->add_option("--out", o.out, "output record JSON");

  auto* pa = app.add_subcommand("pareto", "Loss/bits Pareto frontier of a corpus");
  pa->add_option("--graph", o.graph, "graph JSON");
  pa->add_option("--corpus", o.corpus, "corpus JSONL");
  pa->add_option("--out", o.out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*bg) cmd_build_graph(o);
    else if (*sm) cmd_sample(o);
    else if (*co) cmd_corpus(o);
    else if (*tr) cmd_train(o);
    else if (*bc) cmd_build_config(o);
    else if (*ev) cmd_eval(o);
    else if (*pa) cmd_pareto(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
