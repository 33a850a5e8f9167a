#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "coldbench/corpus/dataset.hpp"
#include "coldbench/experiment/config.hpp"
#include "coldbench/eval/report.hpp"
#include "coldbench/experiment/pipeline.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "fixtures.hpp"

using namespace coldbench;
using namespace coldbench::experiment;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(
seed = 7
n_users = 60
candidates = 20
baseline = "random"

[[datasets]]
name = "toy"
path = "data"

[[methods]]
label = "random"
kind = "random"

[[methods]]
label = "bm25"
kind = "bm25"

[[methods]]
label = "bow"
kind = "dense"
provider = "hashed-bow"
dimension = 256

[[methods]]
label = "bow-emd"
kind = "setsim"
embedding = "bow"
similarity = "emd"

[[methods]]
label = "fixed-llm"
kind = "llm"
provider = "fixed"
response = "[1, 2, 3]"
)";

struct Workspace {
  TempDir dir{"exp"};
  Workspace() {
    corpus::export_dataset(testing_support::planted_dataset({.users = 80, .items_per_user = 10}),
                           dir / "data");
  }
  fs::path write_config(const std::string& text, const std::string& name = "exp.toml") const {
    write_file_atomic(dir / name, text);
    return dir / name;
  }
};

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

const eval::RunResult& find(const ScenarioOutput& s, const std::string& method) {
  for (const auto& r : s.results)
    if (r.method == method) return r;
  throw std::runtime_error("no result for " + method);
}

}  // namespace

// ------------------------------------------------------------ config

TEST(Config, ParsesMethodsAndDefaults) {
  const auto c = parse_config(kBase, "/base");
  EXPECT_EQ(c.methods.size(), 5u);
  EXPECT_EQ(c.scenario.L, (std::vector<int>{20}));
  EXPECT_EQ(c.scenario.m, (std::vector<int>{0}));
  EXPECT_EQ(c.method("bow-emd").pairing, "Raw-Raw");
  EXPECT_EQ(c.resolve("data"), fs::path("/base/data"));
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, RejectsInvalidDocuments) {
  const std::string base = kBase;
  const std::vector<std::string> bad{
      base + "\nunknown_key = 1\n",
      base + "\n[[methods]]\nlabel = \"bm25\"\nkind = \"bm25\"\n",
      base + "\n[scenario]\nmode = \"narrow\"\nm = 1\n",
      base + "\n[[methods]]\nlabel = \"s\"\nkind = \"setsim\"\nembedding = \"bow\"\npairing = \"Raw-MQ\"\n",
      base + "\n[[methods]]\nlabel = \"s\"\nkind = \"setsim\"\nembedding = \"nope\"\n",
      base + "\n[[methods]]\nlabel = \"d\"\nkind = \"dense\"\nprovider = \"http\"\ndimension = 3\n",
      base + "\n[[methods]]\nlabel = \"b\"\nkind = \"bm25\"\nk3 = 1.0\n",
      base + "\nk = 30\n",
      "baseline = \"x\"\n[[datasets]]\nname = \"a\"\npath = \"a\"\n[[methods]]\nlabel = \"r\"\nkind = \"random\"\n",
      "this is = not toml [",
  };
  for (const auto& text : bad) {
    EXPECT_THROW(validate(parse_config(text)), ConfigError) << text.substr(base.size() < text.size() ? base.size() : 0);
  }
}

TEST(Config, HashIgnoresEndpointsButNotSettings) {
  const std::string base = kBase;
  const std::string http = "\n[[methods]]\nlabel = \"e5\"\nkind = \"dense\"\nprovider = \"http\"\ndimension = 4\nendpoint = ";
  const auto a = config_hash(parse_config(base + http + "\"http://a:1\"\n"));
  const auto b = config_hash(parse_config(base + http + "\"http://b:2\"\n"));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(config_hash(parse_config(kBase)), config_hash(parse_config(kBase)));
  auto seeded = parse_config(kBase);
  seeded.seed = 8;
  EXPECT_NE(config_hash(seeded), config_hash(parse_config(kBase)));
}

// ------------------------------------------------------------ pipeline

TEST(Pipeline, SmokeRunWritesArtifacts) {
  Workspace ws;
  const auto cfg = load_config(ws.write_config(kBase));
  std::ostringstream log;
  const auto summary = run_experiment(cfg, {.out_dir = ws.dir / "runs", .offline = true, .jobs = 2, .log = &log});
  ASSERT_EQ(summary.scenarios.size(), 1u);
  const auto& sc = summary.scenarios[0];
  EXPECT_EQ(sc.id, "m0_L20");
  for (const char* f : {"results.jsonl", "report.csv", "report.txt", "winloss.csv", "toy/tasks.jsonl",
                        "toy/suite.json", "toy/failures.jsonl", "toy/llm_stats.json", "toy/rankings/bm25.jsonl"}) {
    EXPECT_TRUE(fs::exists(sc.dir / f)) << f;
  }
  EXPECT_TRUE(fs::exists(summary.run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(summary.run_dir / "cache_refs.txt"));
  EXPECT_EQ(summary.run_dir.filename(), config_hash(cfg));
  EXPECT_GE(find(sc, "bm25").mean(eval::Metric::Recall), 0.9);
  EXPECT_GE(find(sc, "bow").mean(eval::Metric::Recall), 0.9);
  EXPECT_EQ(find(sc, "bow-emd").per_user.size(), 60u);
  EXPECT_EQ(summary.failed_tasks, 0u);
  EXPECT_EQ(summary.network_requests, 0u);
  const auto report = read_file(sc.dir / "report.txt");
  EXPECT_NE(report.find("bm25"), std::string::npos);
}

TEST(Pipeline, RerunsAreByteIdenticalAcrossJobCounts) {
  Workspace ws;
  const auto cfg = load_config(ws.write_config(kBase));
  const auto a = run_experiment(cfg, {.out_dir = ws.dir / "a", .offline = true, .jobs = 1});
  const auto b = run_experiment(cfg, {.out_dir = ws.dir / "b", .offline = true, .jobs = 4});
  const auto again = tree(a.run_dir);
  run_experiment(cfg, {.out_dir = ws.dir / "a", .offline = true, .jobs = 3});
  EXPECT_EQ(tree(a.run_dir), again);
  EXPECT_EQ(tree(a.run_dir), tree(b.run_dir));
}

TEST(Pipeline, FailingMethodIsIsolatedAndFlagged) {
  Workspace ws;
  const std::string text = std::string(kBase) +
                           "\n[[methods]]\nlabel = \"cold-llm\"\nkind = \"llm\"\nprovider = \"cache\"\nmodel = \"m\"\n";
  const auto cfg = load_config(ws.write_config(text));
  const auto summary = run_experiment(cfg, {.out_dir = ws.dir / "runs", .offline = true, .jobs = 2});
  const auto& sc = summary.scenarios[0];
  EXPECT_EQ(find(sc, "cold-llm").failed_count(), 60u);
  EXPECT_EQ(find(sc, "bm25").failed_count(), 0u);
  EXPECT_EQ(summary.failed_tasks, 60u);
  const auto report = eval::build_report(sc.results, "random");
  EXPECT_TRUE(report.at("cold-llm", "toy").invalid);
  EXPECT_FALSE(report.at("bm25", "toy").invalid);
  EXPECT_NE(read_file(sc.dir / "toy/failures.jsonl").find("cold-llm"), std::string::npos);
}

TEST(Pipeline, SweepWritesOneScenarioPerM) {
  Workspace ws;
  const std::string text = std::string(kBase) + "\n[scenario]\nmode = \"sweep\"\nm = [0, 1, 3]\n";
  const auto cfg = load_config(ws.write_config(text));
  const auto summary = run_experiment(cfg, {.out_dir = ws.dir / "runs", .offline = true, .jobs = 2});
  ASSERT_EQ(summary.scenarios.size(), 3u);
  EXPECT_EQ(summary.scenarios[2].id, "m3_L20");
  EXPECT_TRUE(fs::exists(summary.run_dir / "sweep.csv"));
  std::set<std::string> users0, users3;
  for (const auto& [u, s] : find(summary.scenarios[0], "bm25").per_user) users0.insert(u);
  for (const auto& [u, s] : find(summary.scenarios[2], "bm25").per_user) users3.insert(u);
  EXPECT_EQ(users0, users3);
}

TEST(Pipeline, RegeneratedReportMatches) {
  Workspace ws;
  const auto cfg = load_config(ws.write_config(kBase));
  const auto summary = run_experiment(cfg, {.out_dir = ws.dir / "runs", .offline = true});
  const auto& dir = summary.scenarios[0].dir;
  const auto before = read_file(dir / "report.txt") + read_file(dir / "report.csv") + read_file(dir / "winloss.csv");
  fs::remove(dir / "report.txt");
  fs::remove(dir / "report.csv");
  regenerate_report(dir, cfg.baseline, cfg.alpha, cfg.k);
  EXPECT_EQ(read_file(dir / "report.txt") + read_file(dir / "report.csv") + read_file(dir / "winloss.csv"), before);
}

TEST(Pipeline, StopsAfterSuitesStage) {
  Workspace ws;
  const auto cfg = load_config(ws.write_config(kBase));
  const auto summary = run_experiment(cfg, {.out_dir = ws.dir / "runs", .offline = true, .until = Stage::Suites});
  EXPECT_TRUE(fs::exists(summary.run_dir / "m0_L20/toy/tasks.jsonl"));
  EXPECT_FALSE(fs::exists(summary.run_dir / "m0_L20/results.jsonl"));
}

// ------------------------------------------------------------ cache gc

TEST(CacheGc, EmptyCacheFreesNothing) {
  TempDir dir("gc");
  fs::create_directories(dir / "cache");
  const auto r = cache_gc(dir / "cache", dir / "runs", {.max_age = std::chrono::seconds(1)});
  EXPECT_EQ(r.freed_bytes, 0u);
  EXPECT_TRUE(r.removed.empty());
}

TEST(CacheGc, StaleEntryRemovedPinnedEntryKept) {
  TempDir dir("gc");
  write_file_atomic(dir / "cache/emb-old-1234/embeddings.bin", std::string(1000, 'x'));
  write_file_atomic(dir / "cache/emb-pinned-5678/embeddings.bin", std::string(500, 'y'));
  write_file_atomic(dir / "cache/llm_cache.jsonl", "{}\n");
  const auto old = fs::file_time_type::clock::now() - std::chrono::hours(24 * 30);
  for (const auto& e : fs::recursive_directory_iterator(dir / "cache")) fs::last_write_time(e.path(), old);
  fs::last_write_time(dir / "cache/llm_cache.jsonl", fs::file_time_type::clock::now());
  write_file_atomic(dir / "runs/abc/cache_refs.txt", "emb-pinned-5678\n");
  write_file_atomic(dir / "runs/abc/PINNED", "");

  const auto r = cache_gc(dir / "cache", dir / "runs", {.max_age = std::chrono::hours(24)});
  EXPECT_EQ(r.freed_bytes, 1000u);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_FALSE(fs::exists(dir / "cache/emb-old-1234"));
  EXPECT_TRUE(fs::exists(dir / "cache/emb-pinned-5678"));
  EXPECT_TRUE(fs::exists(dir / "cache/llm_cache.jsonl"));

  // unpinning exposes the entry
  fs::remove(dir / "runs/abc/PINNED");
  const auto r2 = cache_gc(dir / "cache", dir / "runs", {.max_age = std::chrono::hours(24)});
  EXPECT_EQ(r2.freed_bytes, 500u);
}

TEST(CacheGc, SizeBudgetRemovesOldestFirst) {
  TempDir dir("gc");
  const auto now = fs::file_time_type::clock::now();
  for (int i = 0; i < 3; ++i) {
    const auto p = dir / ("cache/e" + std::to_string(i) + ".jsonl");
    write_file_atomic(p, std::string(100, 'z'));
    fs::last_write_time(p, now - std::chrono::hours(10 - i));
  }
  const auto r = cache_gc(dir / "cache", dir / "runs", {.max_bytes = 150});
  EXPECT_EQ(r.freed_bytes, 200u);
  EXPECT_TRUE(fs::exists(dir / "cache/e2.jsonl"));
}

// ------------------------------------------------------------ cli

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COLDBENCH_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ReportSweepAndErrors) {
  Workspace ws;
  const auto cfg = ws.write_config(kBase);
  const auto out = ws.dir / "runs";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string() + " --offline report"), 0);
  const auto run_dir = out / config_hash(load_config(cfg));
  EXPECT_TRUE(fs::exists(run_dir / "m0_L20/report.txt"));
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string() + " report --results " +
                    (run_dir / "m0_L20").string() + " --baseline random"),
            0);
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string() + " --offline bench build"), 0);
  EXPECT_EQ(run_cli("--out " + out.string() + " cache gc --max-age-days 30"), 0);

  const auto bad = ws.write_config(std::string(kBase) + "\nbogus = 1\n", "bad.toml");
  EXPECT_EQ(run_cli("--config " + bad.string() + " --out " + out.string() + " report"), 2);
  const auto online = ws.write_config(
      std::string(kBase) + "\n[[methods]]\nlabel = \"e5\"\nkind = \"dense\"\nprovider = \"http\"\ndimension = 4\n"
                           "endpoint = \"http://127.0.0.1:9\"\n",
      "online.toml");
  // warming the cache offline cannot proceed; a full run records the misses as failed tasks
  EXPECT_EQ(run_cli("--config " + online.string() + " --out " + out.string() + " --offline embed"), 3);
  EXPECT_EQ(run_cli("--config " + online.string() + " --out " + out.string() + " --offline report"), 0);
}
