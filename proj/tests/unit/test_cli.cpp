#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mixq/io/files.hpp"
#include "mixq/io/serialize.hpp"

namespace fs = std::filesystem;
using mixq::io::json;
using mixq::io::read_file;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MIXQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t lines(const fs::path& p) {
  const auto s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mixq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("build-graph --family toy-vae --out " + p("g.json")), 2);
  EXPECT_EQ(run("build-graph --family toy-dit --blocks x --out " + p("g.json")), 2);
  EXPECT_EQ(run("build-graph --family toy-dit"), 2);
  ASSERT_EQ(run("build-graph --family toy-dit --blocks 1 --width 8 --out " + p("g.json")), 0);
  EXPECT_EQ(run("corpus --graph " + p("g.json") + " --n-configs 4 --mode fast --out " + p("c.jsonl")), 2);
  EXPECT_EQ(run("train --corpus " + p("c.jsonl") + " --out " + p("ens")), 2);
}

TEST_F(Cli, DataErrorsExitWithThree) {
  std::ofstream(p("bad.json")) << "{ not json";
  EXPECT_EQ(run("sample --graph " + p("bad.json") + " --n-configs 3 --out " + p("s.jsonl")), 3);
  std::ofstream(p("future.json")) << R"({"schema_version": "9.0", "kind": "graph"})";
  EXPECT_EQ(run("sample --graph " + p("future.json") + " --n-configs 3 --out " + p("s.jsonl")), 3);
  EXPECT_EQ(run("sample --graph " + p("missing.json") + " --n-configs 3 --out " + p("s.jsonl")), 3);
}

TEST_F(Cli, CorpusRefusesToOverwrite) {
  ASSERT_EQ(run("build-graph --family toy-dit --blocks 1 --width 8 --out " + p("g.json")), 0);
  ASSERT_EQ(run("corpus --graph " + p("g.json") + " --n-configs 5 --out " + p("c.jsonl")), 0);
  const auto before = read_file(p("c.jsonl"));
  EXPECT_EQ(run("corpus --graph " + p("g.json") + " --n-configs 6 --out " + p("c.jsonl")), 2);
  EXPECT_EQ(read_file(p("c.jsonl")), before);
}

TEST_F(Cli, PipelineOutputsAndDeterminism) {
  const std::string g = p("g.json");
  ASSERT_EQ(run("build-graph --family toy-dit --blocks 1 --width 8 --seed 3 --out " + g), 0);
  const auto graph = json::parse(read_file(g));
  const std::size_t W = graph["weight_nodes"].get<std::size_t>();
  ASSERT_EQ(run("sample --graph " + g + " --n-configs 7 --seed 1 --out " + p("s.jsonl")), 0);
  EXPECT_EQ(lines(p("s.jsonl")), 7u);
  EXPECT_TRUE(fs::exists(p("s.jsonl.run.json")));

  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    ASSERT_EQ(run("corpus --graph " + g + " --n-configs 30 --seed 2 --out " + p("c" + t + ".jsonl")), 0);
    ASSERT_EQ(run("train --graph " + g + " --corpus " + p("c" + t + ".jsonl") +
                  " --folds 2 --epochs 2 --batch 16 --seed 4 --out " + p("ens" + t)),
              0);
    ASSERT_EQ(run("build-config --graph " + g + " --ensemble " + p("ens" + t) + " --level op --out " + p("op" + t)), 0);
    ASSERT_EQ(
        run("build-config --graph " + g + " --ensemble " + p("ens" + t) + " --level block --out " + p("blk" + t)), 0);
  }
  EXPECT_EQ(lines(p("ca.jsonl")), 30u);
  EXPECT_EQ(read_file(p("ca.jsonl")), read_file(p("cb.jsonl")));
  EXPECT_EQ(read_file(p("ensa/manifest.json")), read_file(p("ensb/manifest.json")));
  EXPECT_EQ(read_file(p("ensa/member0.bin")), read_file(p("ensb/member0.bin")));
  EXPECT_EQ(read_file(p("opa/config.json")), read_file(p("opb/config.json")));
  EXPECT_EQ(read_file(p("blka/config.json")), read_file(p("blkb/config.json")));
  // One aggregate row per candidate choice of every weight layer.
  EXPECT_EQ(lines(p("opa/op_scores.csv")), 1 + 6 * W);
  EXPECT_TRUE(fs::exists(p("opa/run.json")));
  EXPECT_TRUE(fs::exists(p("ensa/run.json")));

  ASSERT_EQ(run("eval --graph " + g + " --config " + p("opa/config.json") + " --mode pure --out " + p("e.json")), 0);
  const auto rec = json::parse(read_file(p("e.json")));
  EXPECT_EQ(rec["mode"], "pure");
  EXPECT_DOUBLE_EQ(rec["y"].get<double>(), -rec["oracle_loss"].get<double>());
  ASSERT_EQ(run("pareto --graph " + g + " --corpus " + p("ca.jsonl") + " --out " + p("front.csv")), 0);
  EXPECT_GE(lines(p("front.csv")), 2u);

  // A corpus that does not belong to the graph is a data error.
  ASSERT_EQ(run("build-graph --family toy-unet --blocks 1 --width 8 --out " + p("u.json")), 0);
  EXPECT_EQ(run("train --graph " + p("u.json") + " --corpus " + p("ca.jsonl") + " --epochs 1 --out " + p("ensu")), 3);
}
