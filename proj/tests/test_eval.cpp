#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "coldbench/eval/metrics.hpp"
#include "coldbench/eval/report.hpp"
#include "coldbench/eval/wilcoxon.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/rng.hpp"
#include "fixtures.hpp"

using namespace coldbench;
using namespace coldbench::eval;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("c" + std::to_string(i));
  return v;
}

// Ranking of `length` items with the given 1-based ranks holding p0, p1, ...
std::vector<std::string> with_positives_at(const std::vector<int>& ranks, std::size_t length) {
  std::vector<std::string> r(length);
  std::size_t filler = 0;
  for (std::size_t i = 0; i < length; ++i) r[i] = "n" + std::to_string(filler++);
  for (std::size_t j = 0; j < ranks.size(); ++j) r[static_cast<std::size_t>(ranks[j] - 1)] = "p" + std::to_string(j);
  return r;
}

const std::vector<std::string> kPos{"p0", "p1", "p2"};

// Tail probability by walking all 2^n sign patterns over the mid-ranks.
double enumerate_p(const std::vector<double>& d, Alternative alt) {
  std::vector<double> nz;
  for (double v : d)
    if (std::abs(v) > 1e-12) nz.push_back(v);
  const std::size_t n = nz.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(std::abs(nz[order[j + 1]]) - std::abs(nz[order[j]])) <= 1e-12) ++j;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = (static_cast<double>(i + j) + 2) / 2;
    i = j + 1;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) w += rank[i];
  // Gray-code walk: consecutive patterns differ in one sign
  std::uint64_t hits = 0;
  double s = 0;
  std::uint64_t prev = 0;
  for (std::uint64_t step = 0; step < (std::uint64_t{1} << n); ++step) {
    const std::uint64_t gray = step ^ (step >> 1);
    const std::uint64_t flipped = gray ^ prev;
    if (flipped) {
      const auto bit = static_cast<std::size_t>(__builtin_ctzll(flipped));
      s += (gray & flipped) ? rank[bit] : -rank[bit];
    }
    prev = gray;
    if (alt == Alternative::Greater ? s >= w - 1e-9 : s <= w + 1e-9) ++hits;
  }
  return static_cast<double>(hits) / std::ldexp(1.0, static_cast<int>(n));
}

RunResult run(const std::string& method, const std::string& dataset,
              const std::vector<std::pair<double, double>>& scores, std::size_t failed_first = 0) {
  RunResult r;
  r.method = method;
  r.dataset = dataset;
  r.candidates = 50;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "u%03zu", i);
    r.per_user[name] = {scores[i].first, scores[i].second, i < failed_first};
  }
  return r;
}

}  // namespace

// ------------------------------------------------------------ metrics

TEST(Metrics, RecallExamples) {
  EXPECT_DOUBLE_EQ(recall_at_k(with_positives_at({1, 5, 10}, 50), kPos, 10), 1.0);
  EXPECT_NEAR(recall_at_k(with_positives_at({3, 11, 50}, 50), kPos, 10), 1.0 / 3, 1e-15);
  EXPECT_DOUBLE_EQ(recall_at_k(with_positives_at({11, 12, 13}, 50), kPos, 10), 0.0);
  EXPECT_THROW(recall_at_k(ids(5), kPos, 10), ConfigError);
  EXPECT_THROW(recall_at_k(ids(50), {}, 10), ConfigError);
  EXPECT_THROW(recall_at_k(ids(50), kPos, 0), ConfigError);
}

TEST(Metrics, NdcgExamples) {
  EXPECT_DOUBLE_EQ(ndcg_at_k(with_positives_at({1, 2, 3}, 50), kPos, 10), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(with_positives_at({20, 30, 40}, 50), kPos, 10), 0.0);
  EXPECT_NEAR(ndcg_at_k(with_positives_at({2, 5, 11}, 50), kPos, 10), 0.47762, 1e-5);
  const double dcg = 1 / std::log2(3.0) + 1 / std::log2(6.0);
  const double idcg = 1 + 1 / std::log2(3.0) + 0.5;
  EXPECT_NEAR(ndcg_at_k(with_positives_at({2, 5, 11}, 50), kPos, 10), dcg / idcg, 1e-15);
  // ideal over min(k, |positives|)
  EXPECT_DOUBLE_EQ(ndcg_at_k(with_positives_at({1, 2, 3}, 50), kPos, 2), 1.0);
}

TEST(Metrics, RandomRankingsAverageToHypergeometricMean) {
  Rng rng(1);
  auto base = with_positives_at({1, 2, 3}, 50);
  double total = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    rng.shuffle(base);
    total += recall_at_k(base, kPos, 10);
  }
  EXPECT_NEAR(total / trials, 0.2, 0.01);
}

TEST(Metrics, DependOnlyOnPositivePositions) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> ranks;
    while (ranks.size() < 3) {
      const int r = 1 + static_cast<int>(rng.below(20));
      if (std::find(ranks.begin(), ranks.end(), r) == ranks.end()) ranks.push_back(r);
    }
    auto a = with_positives_at(ranks, 20);
    auto b = a;
    // shuffle the negatives among their own slots
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b[i][0] == 'n') slots.push_back(i);
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(b[slots[i - 1]], b[slots[rng.below(i)]]);
    EXPECT_EQ(recall_at_k(a, kPos, 10), recall_at_k(b, kPos, 10));
    EXPECT_EQ(ndcg_at_k(a, kPos, 10), ndcg_at_k(b, kPos, 10));
    const double n = ndcg_at_k(a, kPos, 10);
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 1.0);
  }
}

TEST(Metrics, EvaluateRunOracleReversedAndErrors) {
  const auto ds = testing_support::random_dataset({.users = 100, .items = 300});
  const auto suite = bench::build_tasks(ds, {.mode = bench::Mode::Narrow, .m = 0, .L = 50, .n_users = 40});
  std::vector<Ranking> oracle, reversed;
  for (const auto& t : suite.tasks) {
    std::vector<std::string> r = t.positive_ids;
    for (const auto& c : t.candidate_ids)
      if (std::find(r.begin(), r.end(), c) == r.end()) r.push_back(c);
    oracle.push_back({t.user_id, r, "oracle", 0});
    std::reverse(r.begin(), r.end());
    reversed.push_back({t.user_id, r, "rev", 0});
  }
  const auto good = evaluate_run(suite, oracle, 10, "oracle");
  EXPECT_DOUBLE_EQ(good.mean(Metric::Recall), 1.0);
  EXPECT_DOUBLE_EQ(good.mean(Metric::Ndcg), 1.0);
  const auto bad = evaluate_run(suite, reversed, 10, "rev");
  EXPECT_DOUBLE_EQ(bad.mean(Metric::Recall), 0.0);
  EXPECT_DOUBLE_EQ(bad.mean(Metric::Ndcg), 0.0);

  auto missing = oracle;
  missing.pop_back();
  EXPECT_THROW(evaluate_run(suite, missing, 10, "x"), DataError);
  auto extra = oracle;
  extra.push_back({"ghost", oracle[0].item_ids, "x", 0});
  EXPECT_THROW(evaluate_run(suite, extra, 10, "x"), DataError);
  auto broken = oracle;
  broken[0].item_ids.pop_back();
  EXPECT_THROW(evaluate_run(suite, broken, 10, "x"), DataError);

  auto partial = oracle;
  const std::string failed_user = partial.back().user_id;
  partial.pop_back();
  const auto with_failure = evaluate_run(suite, partial, 10, "x", {failed_user});
  EXPECT_EQ(with_failure.failed_count(), 1u);
  EXPECT_EQ(with_failure.per_user.at(failed_user).recall, 0.0);
  EXPECT_NEAR(with_failure.mean(Metric::Recall), 39.0 / 40.0, 1e-15);
}

TEST(Metrics, MixtureMeanIsArithmeticMean) {
  const auto r = run("m", "d", {{1.0, 0.5}, {0.0, 0.25}, {1.0 / 3, 0.0}});
  EXPECT_NEAR(r.mean(Metric::Recall), (1.0 + 0 + 1.0 / 3) / 3, 1e-15);
  EXPECT_NEAR(r.mean(Metric::Ndcg), 0.25, 1e-15);
}

// ------------------------------------------------------------ Wilcoxon

TEST(Wilcoxon, AllPositiveGivesTwoToMinusN) {
  const std::vector<double> d{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const auto r = wilcoxon_signed_rank(d, Alternative::Greater);
  EXPECT_DOUBLE_EQ(r.p_value, 0.015625);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d, Alternative::Less).p_value, 1.0);
  for (std::size_t n = 1; n <= 25; ++n) {
    std::vector<double> all(n, 1.0);
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(all, Alternative::Greater).p_value, std::ldexp(1.0, -static_cast<int>(n)));
  }
}

TEST(Wilcoxon, DegenerateWhenEqual) {
  const std::vector<double> x{0.1, 0.5, 1.0};
  const auto r = wilcoxon_one_sided(x, x, Alternative::Greater);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n_effective, 0u);
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.below(16);
    std::vector<double> d(n);
    for (auto& v : d) {
      // coarse grid so zeros and ties show up
      v = static_cast<double>(static_cast<int>(rng.below(9)) - 4) / 4.0;
    }
    for (auto alt : {Alternative::Greater, Alternative::Less}) {
      EXPECT_NEAR(wilcoxon_signed_rank(d, alt).p_value, enumerate_p(d, alt), 1e-12);
    }
  }
}

TEST(Wilcoxon, TwentyMixedSignsMatchesEnumeration) {
  std::vector<double> d;
  for (int i = 1; i <= 20; ++i) d.push_back((i % 3 == 0 ? -1.0 : 1.0) * (0.05 * i + (i % 4 == 0 ? 0.0 : 0.01)));
  for (auto alt : {Alternative::Greater, Alternative::Less}) {
    const auto r = wilcoxon_signed_rank(d, alt);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, enumerate_p(d, alt), 1e-12);
  }
}

TEST(Wilcoxon, AlternativesAreMirrorImages) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> d(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = rng.uniform() - 0.4;
      neg[i] = -d[i];
    }
    EXPECT_EQ(wilcoxon_signed_rank(d, Alternative::Greater).p_value,
              wilcoxon_signed_rank(neg, Alternative::Less).p_value);
  }
}

TEST(Wilcoxon, NormalApproximationBeyondExactRange) {
  std::vector<double> d;
  for (int i = 1; i <= 26; ++i) d.push_back(i % 4 == 0 ? -i : i);
  const auto r = wilcoxon_signed_rank(d, Alternative::Greater);
  EXPECT_FALSE(r.exact);
  EXPECT_NEAR(r.p_value, enumerate_p(d, Alternative::Greater), 0.01);
  // W+ = 351 - (4+8+...+24) = 267, mean 175.5, var 26*27*53/24
  const double z = (267 - 175.5 - 0.5) / std::sqrt(26.0 * 27 * 53 / 24);
  EXPECT_NEAR(r.p_value, 0.5 * std::erfc(z / std::sqrt(2.0)), 1e-12);
}

TEST(Wilcoxon, DominatingMethodOnFiveHundredUsers) {
  std::vector<double> x(500), y(500);
  for (std::size_t i = 0; i < 500; ++i) {
    y[i] = 0.1 + 0.001 * static_cast<double>(i % 7);
    x[i] = y[i] + 0.1 + 0.0001 * static_cast<double>(i);
  }
  EXPECT_LT(wilcoxon_one_sided(x, y, Alternative::Greater).p_value, 1e-4);
  EXPECT_GT(wilcoxon_one_sided(x, y, Alternative::Less).p_value, 0.5);
}

// ------------------------------------------------------------ win/loss and reports

TEST(WinLossCount, FiveUserFixture) {
  const auto a = run("a", "d", {{1.0, 1.0}, {0.5, 0.5}, {0.2, 0.3}, {0.0, 0.1}, {0.6, 0.6}});
  const auto b = run("b", "d", {{0.5, 1.0}, {0.5, 0.5}, {0.1, 0.3}, {0.3, 0.1}, {0.6, 0.6}});
  EXPECT_EQ(win_loss_same(a, b, Metric::Recall), (WinLoss{2, 1, 2}));
  EXPECT_EQ(win_loss_same(a, a, Metric::Recall), (WinLoss{0, 0, 5}));
  EXPECT_EQ(win_loss_same(a, b, Metric::Ndcg), (WinLoss{0, 0, 5}));
  auto c = b;
  c.per_user.erase("u000");
  EXPECT_THROW(win_loss_same(a, c, Metric::Recall), DataError);
}

TEST(Report, BaselineOnlyHasNoMarkers) {
  const auto t = build_report({run("bm25", "d", {{0.5, 0.4}, {0.1, 0.2}})}, "bm25");
  const auto& cell = t.at("bm25", "d");
  EXPECT_DOUBLE_EQ(cell.recall, 0.3);
  EXPECT_TRUE(cell.recall_marker.empty());
  EXPECT_TRUE(cell.ndcg_marker.empty());
  EXPECT_THROW(build_report({run("x", "d", {{0.5, 0.4}})}, "bm25"), ConfigError);
}

TEST(Report, MarkersFollowOneSidedTests) {
  std::vector<std::pair<double, double>> base, better, worse, noisy;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double b = 0.2 + 0.001 * (i % 50);
    base.push_back({b, b});
    better.push_back({b + 0.1 + 1e-4 * i, b + 0.05});
    worse.push_back({b - 0.1 - 1e-4 * i, b - 0.05});
    noisy.push_back({b + (rng.uniform() - 0.5) * 0.1, b});
  }
  const auto t = build_report({run("bm25", "d", base), run("up", "d", better), run("down", "d", worse),
                               run("noise", "d", noisy)},
                              "bm25");
  EXPECT_EQ(t.at("up", "d").recall_marker, "*");
  EXPECT_EQ(t.at("up", "d").ndcg_marker, "*");
  EXPECT_EQ(t.at("down", "d").recall_marker, "▽");
  EXPECT_EQ(t.at("noise", "d").recall_marker, "");
  EXPECT_EQ(t.at("noise", "d").ndcg_marker, "");
  EXPECT_EQ(t.methods.front(), "bm25");
  for (const auto& [key, cell] : t.cells) {
    EXPECT_FALSE(cell.p_recall_greater <= t.alpha && cell.p_recall_less <= t.alpha);
  }
}

TEST(Report, AllColumnPoolsUsersAndMacroAveragesDatasets) {
  const auto t = build_report({run("bm25", "a", {{1.0, 1.0}}), run("bm25", "b", {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}})},
                              "bm25");
  EXPECT_DOUBLE_EQ(t.at("bm25", kAllColumn).recall, 0.25);
  EXPECT_DOUBLE_EQ(t.at("bm25", kMacroColumn).recall, 0.5);
  EXPECT_EQ(t.at("bm25", kAllColumn).users, 4u);
  const auto single = build_report({run("bm25", "a", {{1.0, 1.0}})}, "bm25");
  const auto cols = single.columns();
  EXPECT_EQ(std::count(cols.begin(), cols.end(), kMacroColumn), 0);
}

TEST(Report, FailedFractionFlagsInvalid) {
  std::vector<std::pair<double, double>> s(100, {0.5, 0.5});
  const auto t = build_report({run("bm25", "d", s), run("llm", "d", s, 6), run("ok", "d", s, 5)}, "bm25");
  EXPECT_TRUE(t.at("llm", "d").invalid);
  EXPECT_FALSE(t.at("ok", "d").invalid);
  EXPECT_NE(report_to_text(t).find("!"), std::string::npos);
}

TEST(Report, RegeneratedFromDiskIsByteIdentical) {
  testing_support::TempDir dir("report");
  Rng rng(6);
  std::vector<RunResult> results;
  for (const char* ds : {"job", "movie"}) {
    for (const char* method : {"bm25", "dense", "llm"}) {
      std::vector<std::pair<double, double>> s;
      for (int i = 0; i < 40; ++i) s.push_back({rng.below(4) / 3.0, rng.uniform()});
      results.push_back(run(method, ds, s, std::string(method) == "llm" ? 1 : 0));
    }
  }
  const auto t = build_report(results, "bm25");
  write_results(dir / "results.jsonl", results);
  const auto back = read_results(dir / "results.jsonl");
  const auto t2 = build_report(back, "bm25");
  EXPECT_EQ(report_to_csv(t), report_to_csv(t2));
  EXPECT_EQ(report_to_text(t), report_to_text(t2));
  EXPECT_EQ(winloss_to_csv(results, "bm25"), winloss_to_csv(back, "bm25"));
  EXPECT_EQ(results_to_jsonl(results), results_to_jsonl(back));
  const auto wl = winloss_to_csv(results, "bm25");
  EXPECT_EQ(wl.substr(0, wl.find('\n')), "dataset,pair,metric,a_wins,b_wins,same");
}
