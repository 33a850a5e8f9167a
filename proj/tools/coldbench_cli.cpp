#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "coldbench/experiment/pipeline.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"

namespace fs = std::filesystem;
using namespace coldbench;
using namespace coldbench::experiment;

namespace {

struct Globals {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  bool offline = false;
  int jobs = 1;
};

int run_stage(const Globals& g, Stage stage) {
  if (g.config.empty()) throw ConfigError("--config is required");
  auto cfg = load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  RunOptions opt;
  opt.out_dir = g.out;
  opt.offline = g.offline;
  opt.jobs = g.jobs;
  opt.until = stage;
  opt.log = &std::cerr;
  const auto summary = run_experiment(cfg, opt);
  if (stage == Stage::Report) {
    for (const auto& sc : summary.scenarios) {
      std::cout << "== " << sc.id << " ==\n" << read_file(sc.dir / "report.txt");
    }
  }
  std::cout << "run directory: " << summary.run_dir.string() << "\n";
  std::cerr << "network requests: " << summary.network_requests
            << ", failed tasks: " << summary.failed_tasks << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coldbench: training-free cold-start recommendation benchmark"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment TOML file");
  app.add_option("--out", g.out, "Output root for run directories")->capture_default_str();
  app.add_option("--seed", g.seed, "Override the global seed");
  app.add_flag("--offline", g.offline, "Fail instead of calling remote providers");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1, 256))->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Benchmark suites");
  bench->require_subcommand(1);
  auto* bench_build = bench->add_subcommand("build", "Build and validate task suites");
  auto* embed = app.add_subcommand("embed", "Build suites and fill the embedding cache");
  auto* expand = app.add_subcommand("expand", "Build suites, embeddings and query expansions");
  auto* rank = app.add_subcommand("rank", "Rank every task with every method");
  auto* evaluate = app.add_subcommand("eval", "Rank and write per-user results");
  auto* report = app.add_subcommand("report", "Full run, or rebuild a report from results.jsonl");
  std::string results_dir, baseline;
  double alpha = 1e-4;
  std::size_t k = 10;
  report->add_option("--results", results_dir, "Scenario directory holding results.jsonl");
  report->add_option("--baseline", baseline, "Baseline method (with --results)");
  report->add_option("--alpha", alpha, "Significance level (with --results)")->capture_default_str();
  report->add_option("--k", k, "Cutoff (with --results)")->capture_default_str();
  auto* sweep = app.add_subcommand("sweep", "Full run over every scenario of the config");

  auto* cache = app.add_subcommand("cache", "Cache maintenance");
  cache->require_subcommand(1);
  auto* gc = cache->add_subcommand("gc", "Remove stale cache entries");
  std::string cache_dir, runs_root;
  double max_age_days = 0;
  std::uintmax_t max_bytes = 0;
  gc->add_option("--cache", cache_dir, "Cache directory (default <out>/cache)");
  gc->add_option("--runs", runs_root, "Run root scanned for pinned runs (default <out>)");
  gc->add_option("--max-age-days", max_age_days, "Remove entries older than this")->check(CLI::NonNegativeNumber);
  gc->add_option("--max-bytes", max_bytes, "Shrink the cache below this size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench_build->parsed()) return run_stage(g, Stage::Suites);
    if (embed->parsed()) return run_stage(g, Stage::Embed);
    if (expand->parsed()) return run_stage(g, Stage::Expand);
    if (rank->parsed()) return run_stage(g, Stage::Rank);
    if (evaluate->parsed()) return run_stage(g, Stage::Evaluate);
    if (sweep->parsed()) return run_stage(g, Stage::Report);
    if (report->parsed()) {
      if (results_dir.empty()) return run_stage(g, Stage::Report);
      if (baseline.empty()) throw ConfigError("--baseline is required with --results");
      regenerate_report(results_dir, baseline, alpha, k);
      std::cout << read_file(fs::path(results_dir) / "report.txt");
      return 0;
    }
    if (gc->parsed()) {
      RetentionPolicy policy;
      policy.max_age = std::chrono::seconds(static_cast<long long>(max_age_days * 86400));
      policy.max_bytes = max_bytes;
      const auto r = cache_gc(cache_dir.empty() ? fs::path(g.out) / "cache" : fs::path(cache_dir),
                              runs_root.empty() ? fs::path(g.out) : fs::path(runs_root), policy);
      for (const auto& p : r.removed) std::cout << "removed " << p.string() << "\n";
      std::cout << "freed " << r.freed_bytes << " bytes\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const OfflineError& e) {
    std::cerr << "offline: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
