#pragma once

#include <map>
#include <string>
#include <vector>

#include "coldbench/eval/metrics.hpp"

namespace coldbench::eval {

inline constexpr const char* kMarkerHigher = "*";
inline constexpr const char* kMarkerLower = "▽";

/// Runs with more failed tasks than this fraction are flagged invalid.
inline constexpr double kMaxFailedFraction = 0.05;

struct ReportCell {
  double recall = 0;
  double ndcg = 0;
  std::string recall_marker;
  std::string ndcg_marker;
  double p_recall_greater = 1, p_recall_less = 1;
  double p_ndcg_greater = 1, p_ndcg_less = 1;
  std::size_t users = 0;
  std::size_t failed = 0;
  bool invalid = false;
};

inline constexpr const char* kAllColumn = "All";
inline constexpr const char* kMacroColumn = "All (macro)";

struct ReportTable {
  std::string baseline;
  double alpha = 1e-4;
  std::size_t k = 10;
  std::vector<std::string> methods;   // first-seen order, baseline first
  std::vector<std::string> datasets;  // first-seen order
  /// (method, column) -> cell; columns are the datasets, kAllColumn
  /// (per-user scores pooled across datasets) and, with more than one
  /// dataset, kMacroColumn (mean of dataset means, unmarked).
  std::map<std::pair<std::string, std::string>, ReportCell> cells;
  std::vector<std::string> warnings;

  std::vector<std::string> columns() const;
  const ReportCell& at(const std::string& method, const std::string& column) const;
};

/// Marks a cell "*" when the one-sided test (greater) against the baseline
/// gives p <= alpha and the lower marker when the "less" test does. Throws
/// ConfigError if the baseline is absent from any dataset.
ReportTable build_report(const std::vector<RunResult>& results, const std::string& baseline,
                         double alpha = 1e-4, std::size_t k = 10);

std::string report_to_csv(const ReportTable& table);
std::string report_to_text(const ReportTable& table);

/// winloss.csv: dataset,pair,metric,a_wins,b_wins,same for every
/// non-baseline method against the baseline.
std::string winloss_to_csv(const std::vector<RunResult>& results, const std::string& baseline);

}  // namespace coldbench::eval
