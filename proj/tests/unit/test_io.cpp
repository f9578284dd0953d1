#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "mixq/core/errors.hpp"
#include "mixq/ensemble/ensemble.hpp"
#include "mixq/ensemble/folds.hpp"
#include "mixq/io/files.hpp"
#include "mixq/io/serialize.hpp"
#include "mixq/io/tensor_dump.hpp"
#include "mixq/oracle/corpus.hpp"
#include "support/random_graphs.hpp"

using namespace mixq;
using namespace mixq::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mixq_io_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string unhex(const std::string& h) {
  std::string out;
  for (std::size_t i = 0; i < h.size(); i += 2) out.push_back(static_cast<char>(std::stoi(h.substr(i, 2), nullptr, 16)));
  return out;
}

// Replaces the trailing checksum so that only the field under test is wrong.
std::string reseal(std::string bytes) {
  bytes.resize(bytes.size() - 32);
  return bytes + unhex(sha256_hex(bytes));
}

}  // namespace

TEST(Files, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Files, AtomicWriteCreatesParentsAndLeavesNoTemporary) {
  const auto dir = scratch("atomic");
  const auto p = dir / "a" / "b" / "out.txt";
  write_atomic(p, "hello");
  EXPECT_EQ(read_file(p), "hello");
  write_atomic(p, "bye");
  EXPECT_EQ(read_file(p), "bye");
  EXPECT_EQ(sha256_file(p), sha256_hex("bye"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) files += e.is_regular_file();
  EXPECT_EQ(files, 1u);
  EXPECT_THROW(read_file(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST(TensorDump, RoundTripAndLayout) {
  TensorDump t{{2, 3}, {1, -2, 3.5, 0, 1e-300, -0.0}};
  const auto bytes = encode_tensor(t);
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 4 + 2 * 8 + 6 * 8 + 32);
  EXPECT_EQ(bytes.substr(0, 8), "MIXQTNSR");
  std::uint32_t ndim = 0;
  std::memcpy(&ndim, bytes.data() + 16, 4);
  EXPECT_EQ(ndim, 2u);
  double first = 0;
  std::memcpy(&first, bytes.data() + 20 + 16, 8);
  EXPECT_EQ(first, 1.0);
  EXPECT_EQ(bytes.substr(bytes.size() - 32), unhex(sha256_hex(bytes.substr(0, bytes.size() - 32))));
  const auto back = decode_tensor(bytes);
  EXPECT_EQ(back.shape, t.shape);
  ASSERT_EQ(back.data.size(), t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) EXPECT_EQ(std::memcmp(&back.data[i], &t.data[i], 8), 0);
  const auto empty = decode_tensor(encode_tensor({{0, 4}, {}}));
  EXPECT_EQ(empty.numel(), 0u);
}

TEST(TensorDump, RejectsCorruption) {
  const auto good = encode_tensor({{3}, {1, 2, 3}});
  auto flipped = good;
  flipped[30] ^= 1;
  EXPECT_THROW(decode_tensor(flipped), DataError);
  EXPECT_THROW(decode_tensor(good.substr(0, good.size() - 1)), DataError);
  EXPECT_THROW(decode_tensor(good.substr(0, 10)), DataError);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_tensor(reseal(magic)), DataError);
  auto version = good;
  version[8] = 2;
  EXPECT_THROW(decode_tensor(reseal(version)), DataError);
  auto dtype = good;
  dtype[12] = 2;
  EXPECT_THROW(decode_tensor(reseal(dtype)), DataError);
  auto shape = good;
  shape[20] = 4;  // claims 4 elements, payload holds 3
  EXPECT_THROW(decode_tensor(reseal(shape)), DataError);
  EXPECT_THROW(encode_tensor({{2}, {1.0}}), Error);
}

TEST(Schema, VersionAndKindChecks) {
  EXPECT_NO_THROW(check_schema(json{{"schema_version", "1.0"}, {"kind", "graph"}}, "graph"));
  EXPECT_NO_THROW(check_schema(json{{"schema_version", "1.7"}}));
  EXPECT_THROW(check_schema(json{{"schema_version", "2.0"}}), DataError);
  EXPECT_THROW(check_schema(json{{"kind", "graph"}}), DataError);
  EXPECT_THROW(check_schema(json{{"schema_version", 1}}), DataError);
  EXPECT_THROW(check_schema(json{{"schema_version", "1.0"}, {"kind", "config"}}, "graph"), DataError);
  EXPECT_EQ(dump(json{{"a", 1}}), "{\n  \"a\": 1\n}\n");
}

TEST(GraphJson, RoundTripsEveryFamily) {
  for (const auto& fam : graph::known_families()) {
    const auto b = graph::build_graph(fam, {2, 16}, 5);
    const auto j = graph_to_json(b);
    const auto back = graph_from_json(j);
    EXPECT_EQ(dump(graph_to_json(back)), dump(j));
    ASSERT_EQ(back.graph.size(), b.graph.size());
    for (std::size_t v = 0; v < b.graph.size(); ++v) {
      EXPECT_EQ(back.graph.node(v).id, b.graph.node(v).id);
      EXPECT_EQ(back.graph.node(v).out_dim, b.graph.node(v).out_dim);
      EXPECT_EQ(back.graph.node(v).compute, b.graph.node(v).compute);
    }
    EXPECT_EQ(back.graph.edges(), b.graph.edges());
    ASSERT_EQ(back.catalog.size(), b.catalog.size());
    for (std::size_t i = 0; i < b.catalog.size(); ++i) {
      EXPECT_EQ(back.catalog[i].members, b.catalog[i].members);
      EXPECT_EQ(back.catalog[i].hop, b.catalog[i].hop);
    }
    EXPECT_EQ(back.seed, 5u);
  }
}

TEST(GraphJson, RejectsBrokenDocuments) {
  const auto b = graph::build_graph("toy-dit", {1, 16});
  auto j = graph_to_json(b);
  j["schema_version"] = "3.0";
  EXPECT_THROW(graph_from_json(j), DataError);
  j = graph_to_json(b);
  j["edges"].push_back(json::array({j["edges"][1][1], j["edges"][1][0]}));
  EXPECT_THROW(graph_from_json(j), DataError);
  j = graph_to_json(b);
  j["catalog"].erase(0);
  EXPECT_THROW(graph_from_json(j), DataError);
  j = graph_to_json(b);
  j["nodes"] = 5;
  EXPECT_THROW(graph_from_json(j), DataError);
}

TEST(ConfigJson, RoundTripAndMissingNodes) {
  const auto b = graph::build_graph("toy-unet", {1, 16});
  CounterRng rng(3);
  graph::QuantConfig c;
  for (std::size_t s = 0; s < b.graph.weight_nodes().size(); ++s)
    c.choices.push_back(graph::QuantChoice::from_index(static_cast<int>(rng.below(6))));
  const auto j = config_to_json(b.graph, c);
  EXPECT_EQ(config_from_json(b.graph, j), c);
  EXPECT_EQ(j["key"], c.key());
  auto broken = j;
  broken["assignments"].erase(broken["assignments"].begin());
  EXPECT_THROW(config_from_json(b.graph, broken), DataError);
  broken = j;
  broken["assignments"].begin().value()["method"] = "uaq_asym";
  EXPECT_ANY_THROW(config_from_json(b.graph, broken));
  broken = j;
  broken["assignments"].begin().value()["bits"] = 8;
  EXPECT_THROW(config_from_json(b.graph, broken), DataError);
}

TEST(CorpusJsonl, RoundTripWithFailedRecords) {
  const auto m = oracle::build_toy_model("toy-dit", {1, 8}, 4);
  sampler::SampleSpec spec;
  spec.n_configs = 12;
  auto recs = oracle::generate_corpus(m, spec, 0.05, oracle::TargetMode::Constrained);
  recs[3].failed = true;
  recs[3].oracle_loss = NAN;
  const auto text = corpus_to_jsonl(*m.graph, recs);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
  const auto back = corpus_from_jsonl(*m.graph, text);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].config, recs[i].config);
    EXPECT_EQ(back[i].failed, recs[i].failed);
    EXPECT_EQ(back[i].timestamp, recs[i].timestamp);
    EXPECT_EQ(back[i].epsilons, recs[i].epsilons);
    if (!recs[i].failed) {
      EXPECT_EQ(back[i].oracle_loss, recs[i].oracle_loss);
      EXPECT_EQ(back[i].y, recs[i].y);
    }
  }
  EXPECT_EQ(corpus_to_jsonl(*m.graph, back), text);
  EXPECT_NE(text.find("\"oracle_loss\":null"), std::string::npos);
  // Errors name the offending line.
  std::istringstream in(text);
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  try {
    corpus_from_jsonl(*m.graph, l1 + "\n{not json\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(TrainSpecJson, RoundTrip) {
  surrogate::TrainSpec s;
  s.epochs = 17;
  s.lr = 2.5e-3;
  s.rank_loss = surrogate::RankLossKind::LambdaRank;
  s.active_hops = {0, 2};
  s.dims.hidden = 24;
  s.seed = 99;
  const auto back = train_spec_from_json(train_spec_to_json(s));
  EXPECT_EQ(back.epochs, 17);
  EXPECT_EQ(back.lr, 2.5e-3);
  EXPECT_EQ(back.rank_loss, s.rank_loss);
  EXPECT_EQ(back.active_hops, s.active_hops);
  EXPECT_EQ(back.dims, s.dims);
  EXPECT_EQ(back.seed, 99u);
}

TEST(EnsembleDir, SaveLoadIsLosslessDeterministicAndVerified) {
  surrogate::TrainSpec spec;
  spec.dims.hidden = 8;
  spec.dims.layers = 2;
  spec.dims.head_mid = 4;
  spec.epochs = 2;
  spec.batch_size = 8;
  const auto samples = mixq::testing::random_samples(9, 2, 20, 3);
  const auto ens = ensemble::train_ensemble(samples, spec, ensemble::make_folds(20, 2, 1));
  const auto d1 = scratch("ens1"), d2 = scratch("ens2");
  save_ensemble(d1, ens);
  save_ensemble(d2, ens);
  EXPECT_EQ(read_file(d1 / "manifest.json"), read_file(d2 / "manifest.json"));
  const auto back = load_ensemble(d1);
  ASSERT_EQ(back.members.size(), ens.members.size());
  EXPECT_EQ(back.active_hops, ens.active_hops);
  EXPECT_EQ(back.plan.validation, ens.plan.validation);
  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    const auto& a = ens.members[k];
    const auto& b = back.members[k];
    ASSERT_EQ(a.params.tensors.size(), b.params.tensors.size());
    for (std::size_t t = 0; t < a.params.tensors.size(); ++t) EXPECT_EQ(a.params.tensors[t].v, b.params.tensors[t].v);
    for (std::size_t t = 0; t < a.params.buffers.size(); ++t) EXPECT_EQ(a.params.buffers[t].v, b.params.buffers[t].v);
    EXPECT_EQ(a.scaler.mean, b.scaler.mean);
    EXPECT_EQ(a.scaler.std, b.scaler.std);
    ASSERT_EQ(a.hops.size(), b.hops.size());
    for (std::size_t h = 0; h < a.hops.size(); ++h) {
      EXPECT_EQ(a.hops[h].weight, b.hops[h].weight);
      EXPECT_EQ(a.hops[h].mean, b.hops[h].mean);
      EXPECT_EQ(a.hops[h].usable, b.hops[h].usable);
    }
  }
  // Tampering with a parameter file is caught by the manifest digest.
  auto bytes = read_file(d1 / "member0.bin");
  bytes[bytes.size() / 2] ^= 0x40;
  write_atomic(d1 / "member0.bin", bytes);
  EXPECT_THROW(load_ensemble(d1), DataError);
  EXPECT_THROW(load_ensemble(scratch("missing")), DataError);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Csv, ScoreRowsAndFrontier) {
  std::vector<ensemble::ScoreRow> rows(3);
  rows[1].target = "blk0_ff_1";
  rows[1].candidate = "blk0_ff_1=3C";
  const auto csv = score_rows_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "level,target,category,candidate,hop,member,raw,standardized,weighted");
  std::vector<oracle::ConfigRecord> recs(4);
  for (std::size_t i = 0; i < 4; ++i) recs[i].oracle_loss = static_cast<double>(i);
  const auto f = frontier_csv(recs, {0, 2});
  EXPECT_EQ(std::count(f.begin(), f.end(), '\n'), 3);
  EXPECT_EQ(f.substr(0, f.find('\n')), "index,oracle_loss,avg_bits,y,config");
}

TEST(RunManifest, CarriesProvenance) {
  RunManifest m;
  m.tool_version = "0.1.0";
  m.command = "sample";
  m.flags["--n"] = "10";
  m.seeds["seed"] = 4;
  m.outputs["out.jsonl"] = sha256_hex("x");
  m.wall_seconds = 1.5;
  const auto j = run_manifest_to_json(m);
  EXPECT_NO_THROW(check_schema(j, "run"));
  EXPECT_EQ(j["command"], "sample");
  EXPECT_EQ(j["seeds"]["seed"], 4);
  EXPECT_EQ(j["outputs"]["out.jsonl"], sha256_hex("x"));
}
