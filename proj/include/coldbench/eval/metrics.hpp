#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coldbench/bench/suite.hpp"
#include "coldbench/eval/ranking.hpp"

namespace coldbench::eval {

enum class Metric { Recall, Ndcg };
std::string to_string(Metric metric);

/// |top-k ∩ positives| / |positives|. Throws ConfigError when k exceeds the
/// ranking length or positives is empty.
double recall_at_k(const std::vector<std::string>& ranking,
                   const std::vector<std::string>& positives, std::size_t k);

/// Binary-gain nDCG with a log2(rank + 1) discount and the ideal DCG taken
/// over min(k, |positives|) hits.
double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::vector<std::string>& positives, std::size_t k);

struct UserScore {
  double recall = 0;
  double ndcg = 0;
  bool failed = false;

  double get(Metric metric) const { return metric == Metric::Recall ? recall : ndcg; }
};

struct RunResult {
  std::string method;
  std::string dataset;
  int m = 0;
  std::size_t candidates = 0;
  std::size_t k = 10;
  std::map<std::string, UserScore> per_user;

  double mean(Metric metric) const;
  std::size_t failed_count() const;
  std::set<std::string> users() const;
};

/// One ranking per task. Users in `failed` have no ranking and score 0.
/// Throws DataError on a missing, extra or duplicated user, or a ranking
/// that is not a permutation of its task's candidates.
RunResult evaluate_run(const bench::BenchmarkSuite& suite, const std::vector<Ranking>& rankings,
                       std::size_t k, const std::string& method,
                       const std::set<std::string>& failed = {});

struct WinLoss {
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  std::size_t same = 0;

  bool operator==(const WinLoss&) const = default;
};

/// Per-user strict comparison. Throws DataError if the user panels differ.
WinLoss win_loss_same(const RunResult& a, const RunResult& b, Metric metric);

/// Paired scores of two runs, ordered by user id.
void paired_scores(const RunResult& a, const RunResult& b, Metric metric, std::vector<double>& x,
                   std::vector<double>& y);

/// results.jsonl: one {"method", "dataset", "user_id", "recall", "ndcg"}
/// line per user ("failed": true when the task failed).
std::string results_to_jsonl(const std::vector<RunResult>& results);
void write_results(const std::filesystem::path& path, const std::vector<RunResult>& results);
std::vector<RunResult> read_results(const std::filesystem::path& path);

}  // namespace coldbench::eval
