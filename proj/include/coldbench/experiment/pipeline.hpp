#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "coldbench/eval/metrics.hpp"
#include "coldbench/experiment/config.hpp"

namespace coldbench::experiment {

/// How far run_experiment goes. Each stage includes the ones before it.
enum class Stage { Suites, Embed, Expand, Rank, Evaluate, Report };

struct RunOptions {
  std::filesystem::path out_dir = "runs";
  bool offline = false;
  int jobs = 1;
  Stage until = Stage::Report;
  std::ostream* log = nullptr;
};

struct ScenarioOutput {
  std::string id;  // e.g. "m3_L50"
  int m = 0;
  int L = 0;
  std::filesystem::path dir;
  std::vector<eval::RunResult> results;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::filesystem::path cache_dir;
  std::string config_hash;
  std::vector<ScenarioOutput> scenarios;
  std::size_t failed_tasks = 0;
  std::size_t network_requests = 0;
};

/// Loads datasets, builds one suite per (scenario, dataset), ranks every
/// task with every method, evaluates and writes reports under
/// out_dir/<config hash>/. A task a method cannot rank is recorded in
/// failures.jsonl and scored 0; the run continues. Caches live in
/// cache_dir (default out_dir/cache) and are referenced from
/// cache_refs.txt. With warm caches a rerun makes no network calls and
/// rewrites the run directory byte for byte.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Rebuilds report.csv, report.txt and winloss.csv of a scenario directory
/// from its results.jsonl.
void regenerate_report(const std::filesystem::path& scenario_dir, const std::string& baseline,
                       double alpha, std::size_t k);

/// Marker file that protects a run directory from cache_gc.
inline constexpr const char* kPinFile = "PINNED";

struct RetentionPolicy {
  /// Entries not modified for longer than this are removed (0 disables).
  std::chrono::seconds max_age{0};
  /// Oldest entries are removed until the cache fits (0 disables).
  std::uintmax_t max_bytes = 0;
};

struct GcReport {
  std::uintmax_t freed_bytes = 0;
  std::vector<std::filesystem::path> removed;
};

/// Applies the retention policy to the top-level entries of cache_dir.
/// Entries listed in cache_refs.txt of any pinned run under runs_root are
/// never removed, whatever their age.
GcReport cache_gc(const std::filesystem::path& cache_dir, const std::filesystem::path& runs_root,
                  const RetentionPolicy& policy);

}  // namespace coldbench::experiment
