#include "coldbench/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <nlohmann/json.hpp>
#include <unordered_map>
#include <unordered_set>

#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"

namespace coldbench::eval {

std::vector<std::string> order_by_score(const std::vector<std::string>& candidate_ids,
                                        const std::vector<double>& scores) {
  if (candidate_ids.size() != scores.size()) {
    throw DataError("order_by_score: score count does not match candidate count");
  }
  std::vector<std::size_t> idx(candidate_ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidate_ids[a] < candidate_ids[b];
  });
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(candidate_ids[i]);
  return out;
}

std::string to_string(Metric metric) { return metric == Metric::Recall ? "recall" : "ndcg"; }

static void check_args(const std::vector<std::string>& ranking,
                       const std::vector<std::string>& positives, std::size_t k) {
  if (positives.empty()) throw ConfigError("metric needs at least one positive");
  if (k == 0 || k > ranking.size()) {
    throw ConfigError("k=" + std::to_string(k) + " exceeds ranking length " +
                      std::to_string(ranking.size()));
  }
}

double recall_at_k(const std::vector<std::string>& ranking,
                   const std::vector<std::string>& positives, std::size_t k) {
  check_args(ranking, positives, k);
  const std::unordered_set<std::string> pos(positives.begin(), positives.end());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += pos.count(ranking[r]);
  return static_cast<double>(hits) / static_cast<double>(pos.size());
}

double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::vector<std::string>& positives, std::size_t k) {
  check_args(ranking, positives, k);
  const std::unordered_set<std::string> pos(positives.begin(), positives.end());
  double dcg = 0, idcg = 0;
  for (std::size_t r = 1; r <= k; ++r) {
    if (pos.count(ranking[r - 1])) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  const std::size_t ideal = std::min(k, pos.size());
  for (std::size_t r = 1; r <= ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return dcg / idcg;
}

double RunResult::mean(Metric metric) const {
  if (per_user.empty()) return 0;
  double total = 0;
  for (const auto& [_, s] : per_user) total += s.get(metric);
  return total / static_cast<double>(per_user.size());
}

std::size_t RunResult::failed_count() const {
  return static_cast<std::size_t>(std::count_if(per_user.begin(), per_user.end(),
                                                [](const auto& kv) { return kv.second.failed; }));
}

std::set<std::string> RunResult::users() const {
  std::set<std::string> out;
  for (const auto& [u, _] : per_user) out.insert(u);
  return out;
}

RunResult evaluate_run(const bench::BenchmarkSuite& suite, const std::vector<Ranking>& rankings,
                       std::size_t k, const std::string& method,
                       const std::set<std::string>& failed) {
  RunResult run;
  run.method = method;
  run.dataset = suite.tasks.empty() ? "" : suite.tasks.front().domain_name;
  run.m = suite.config.m;
  run.candidates = suite.config.L;
  run.k = k;

  std::unordered_map<std::string, const Ranking*> by_user;
  for (const auto& r : rankings) {
    if (!by_user.emplace(r.user_id, &r).second) {
      throw DataError("duplicate ranking for user " + r.user_id);
    }
  }
  std::size_t matched = 0;
  for (const auto& task : suite.tasks) {
    UserScore score;
    auto it = by_user.find(task.user_id);
    if (failed.count(task.user_id)) {
      if (it != by_user.end()) throw DataError("user " + task.user_id + " is both ranked and failed");
      score.failed = true;
    } else {
      if (it == by_user.end()) throw DataError("missing ranking for user " + task.user_id);
      ++matched;
      const auto& ids = it->second->item_ids;
      auto sorted_ids = ids, sorted_cands = task.candidate_ids;
      std::sort(sorted_ids.begin(), sorted_ids.end());
      std::sort(sorted_cands.begin(), sorted_cands.end());
      if (sorted_ids != sorted_cands) {
        throw DataError("ranking for user " + task.user_id + " is not a permutation of its candidates");
      }
      score.recall = recall_at_k(ids, task.positive_ids, k);
      score.ndcg = ndcg_at_k(ids, task.positive_ids, k);
    }
    run.per_user.emplace(task.user_id, score);
  }
  if (matched != by_user.size()) throw DataError("rankings contain users outside the suite");
  return run;
}

static void require_same_panel(const RunResult& a, const RunResult& b) {
  if (a.per_user.size() != b.per_user.size() ||
      !std::equal(a.per_user.begin(), a.per_user.end(), b.per_user.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw DataError("runs '" + a.method + "' and '" + b.method + "' cover different users");
  }
}

WinLoss win_loss_same(const RunResult& a, const RunResult& b, Metric metric) {
  require_same_panel(a, b);
  WinLoss wl;
  auto ib = b.per_user.begin();
  for (const auto& [_, sa] : a.per_user) {
    const double x = sa.get(metric), y = (ib++)->second.get(metric);
    if (x > y) ++wl.a_wins;
    else if (x < y) ++wl.b_wins;
    else ++wl.same;
  }
  return wl;
}

void paired_scores(const RunResult& a, const RunResult& b, Metric metric, std::vector<double>& x,
                   std::vector<double>& y) {
  require_same_panel(a, b);
  for (const auto& [_, s] : a.per_user) x.push_back(s.get(metric));
  for (const auto& [_, s] : b.per_user) y.push_back(s.get(metric));
}

std::string results_to_jsonl(const std::vector<RunResult>& results) {
  std::string out;
  for (const auto& run : results) {
    for (const auto& [user, s] : run.per_user) {
      nlohmann::ordered_json row;
      row["method"] = run.method;
      row["dataset"] = run.dataset;
      row["user_id"] = user;
      row["recall"] = s.recall;
      row["ndcg"] = s.ndcg;
      row["m"] = run.m;
      row["L"] = run.candidates;
      row["K"] = run.k;
      if (s.failed) row["failed"] = true;
      out += row.dump() + "\n";
    }
  }
  return out;
}

void write_results(const std::filesystem::path& path, const std::vector<RunResult>& results) {
  write_file_atomic(path, results_to_jsonl(results));
}

std::vector<RunResult> read_results(const std::filesystem::path& path) {
  std::vector<RunResult> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed result row");
    }
    const auto key = std::make_pair(row.value("method", ""), row.value("dataset", ""));
    auto [it, fresh] = index.emplace(key, out.size());
    if (fresh) {
      RunResult run;
      run.method = key.first;
      run.dataset = key.second;
      run.m = row.value("m", 0);
      run.candidates = row.value("L", std::size_t{0});
      run.k = row.value("K", std::size_t{10});
      out.push_back(std::move(run));
    }
    UserScore s{row.at("recall").get<double>(), row.at("ndcg").get<double>(),
                row.value("failed", false)};
    out[it->second].per_user[row.at("user_id").get<std::string>()] = s;
  });
  return out;
}

}  // namespace coldbench::eval
