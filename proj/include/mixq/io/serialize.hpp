#pragma once

// JSON / JSONL / CSV forms of graphs, configurations, corpora and ensembles.
// Every JSON document and JSONL line carries "schema_version"; loaders
// reject an unknown major version.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixq/ensemble/builder.hpp"
#include "mixq/ensemble/ensemble.hpp"
#include "mixq/graph/annotate.hpp"
#include "mixq/graph/families.hpp"
#include "mixq/oracle/corpus.hpp"
#include "mixq/oracle/pareto.hpp"

namespace mixq::io {

using nlohmann::json;

inline constexpr int kSchemaMajor = 1;
inline constexpr const char* kSchemaVersion = "1.0";

// Throws DataError if the version is missing or of another major, or if
// `kind` is non-empty and differs from the document's "kind".
void check_schema(const json& j, std::string_view kind = {});

// Stable text form: two-space indent, trailing newline.
std::string dump(const json& j);

json graph_to_json(const graph::BuiltGraph& g);
graph::BuiltGraph graph_from_json(const json& j);

json config_to_json(const graph::NetGraph& g, const graph::QuantConfig& c);
graph::QuantConfig config_from_json(const graph::NetGraph& g, const json& j);

json record_to_json(const graph::NetGraph& g, const oracle::ConfigRecord& r);
oracle::ConfigRecord record_from_json(const graph::NetGraph& g, const json& j);

// One record per line, no header line.
std::string corpus_to_jsonl(const graph::NetGraph& g, const std::vector<oracle::ConfigRecord>& records);
std::vector<oracle::ConfigRecord> corpus_from_jsonl(const graph::NetGraph& g, std::string_view text);

json train_spec_to_json(const surrogate::TrainSpec& s);
surrogate::TrainSpec train_spec_from_json(const json& j);

// Writes manifest.json plus per-member parameter dumps and training logs
// into dir. The manifest records every file's SHA-256 and holds no wall
// times, so it is byte-identical across reruns.
void save_ensemble(const std::filesystem::path& dir, const ensemble::Ensemble& ens);
// Verifies every recorded digest before decoding.
ensemble::Ensemble load_ensemble(const std::filesystem::path& dir);

// Per-member rows: level,target,category,candidate,hop,member,raw,standardized,weighted.
std::string score_rows_csv(const std::vector<ensemble::ScoreRow>& rows);

// records index,oracle_loss,avg_bits,y of the frontier members.
std::string frontier_csv(const std::vector<oracle::ConfigRecord>& records, const std::vector<std::size_t>& frontier);

// Provenance of one command invocation (not deterministic: wall time).
struct RunManifest {
  std::string tool_version;
  std::string command;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  double wall_seconds = 0.0;
};
json run_manifest_to_json(const RunManifest& m);

}  // namespace mixq::io
