#include "coldbench/eval/report.hpp"

#include <algorithm>
#include <cstdio>

#include "coldbench/eval/wilcoxon.hpp"
#include "coldbench/util/error.hpp"

namespace coldbench::eval {

std::vector<std::string> ReportTable::columns() const {
  auto cols = datasets;
  cols.push_back(kAllColumn);
  if (datasets.size() > 1) cols.push_back(kMacroColumn);
  return cols;
}

const ReportCell& ReportTable::at(const std::string& method, const std::string& column) const {
  auto it = cells.find({method, column});
  if (it == cells.end()) throw ConfigError("no report cell for " + method + " / " + column);
  return it->second;
}

namespace {

void add_first_seen(std::vector<std::string>& list, const std::string& value) {
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Display columns of a UTF-8 string (every code point counts as one).
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  const auto w = display_width(s);
  if (w >= width) return s;
  return left_align ? s + std::string(width - w, ' ') : std::string(width - w, ' ') + s;
}

}  // namespace

ReportTable build_report(const std::vector<RunResult>& results, const std::string& baseline,
                         double alpha, std::size_t k) {
  ReportTable table;
  table.baseline = baseline;
  table.alpha = alpha;
  table.k = k;
  table.methods.push_back(baseline);
  for (const auto& r : results) {
    add_first_seen(table.methods, r.method);
    add_first_seen(table.datasets, r.dataset);
  }

  std::map<std::pair<std::string, std::string>, const RunResult*> by_key;
  for (const auto& r : results) {
    if (!by_key.emplace(std::make_pair(r.method, r.dataset), &r).second) {
      throw ConfigError("duplicate result for " + r.method + " on " + r.dataset);
    }
  }
  for (const auto& ds : table.datasets) {
    if (!by_key.count({baseline, ds})) {
      throw ConfigError("baseline '" + baseline + "' has no result on dataset '" + ds + "'");
    }
  }

  auto fill = [&](ReportCell& cell, const std::vector<double>& rx, const std::vector<double>& nx,
                  const std::vector<double>& ry, const std::vector<double>& ny, bool is_baseline) {
    const double n = static_cast<double>(rx.size());
    for (std::size_t i = 0; i < rx.size(); ++i) {
      cell.recall += rx[i];
      cell.ndcg += nx[i];
    }
    if (n > 0) {
      cell.recall /= n;
      cell.ndcg /= n;
    }
    cell.users = rx.size();
    if (is_baseline) return;
    cell.p_recall_greater = wilcoxon_one_sided(rx, ry, Alternative::Greater).p_value;
    cell.p_recall_less = wilcoxon_one_sided(rx, ry, Alternative::Less).p_value;
    cell.p_ndcg_greater = wilcoxon_one_sided(nx, ny, Alternative::Greater).p_value;
    cell.p_ndcg_less = wilcoxon_one_sided(nx, ny, Alternative::Less).p_value;
    if (cell.p_recall_greater <= alpha) cell.recall_marker = kMarkerHigher;
    else if (cell.p_recall_less <= alpha) cell.recall_marker = kMarkerLower;
    if (cell.p_ndcg_greater <= alpha) cell.ndcg_marker = kMarkerHigher;
    else if (cell.p_ndcg_less <= alpha) cell.ndcg_marker = kMarkerLower;
  };

  for (const auto& method : table.methods) {
    const bool is_baseline = method == baseline;
    std::vector<double> all_rx, all_nx, all_ry, all_ny;
    std::size_t all_failed = 0;
    bool complete = true;
    double macro_r = 0, macro_n = 0;
    for (const auto& ds : table.datasets) {
      auto it = by_key.find({method, ds});
      if (it == by_key.end()) {
        complete = false;
        table.warnings.push_back(method + " has no result on " + ds);
        continue;
      }
      const RunResult& run = *it->second;
      const RunResult& base = *by_key.at({baseline, ds});
      std::vector<double> rx, ry, nx, ny;
      paired_scores(run, base, Metric::Recall, rx, ry);
      paired_scores(run, base, Metric::Ndcg, nx, ny);

      ReportCell cell;
      fill(cell, rx, nx, ry, ny, is_baseline);
      cell.failed = run.failed_count();
      cell.invalid = static_cast<double>(cell.failed) >
                     kMaxFailedFraction * static_cast<double>(cell.users);
      if (cell.invalid) {
        table.warnings.push_back(method + " on " + ds + ": " + std::to_string(cell.failed) + " of " +
                                 std::to_string(cell.users) + " tasks failed; cell invalid");
      }
      macro_r += cell.recall;
      macro_n += cell.ndcg;
      all_failed += cell.failed;
      table.cells[{method, ds}] = cell;

      all_rx.insert(all_rx.end(), rx.begin(), rx.end());
      all_ry.insert(all_ry.end(), ry.begin(), ry.end());
      all_nx.insert(all_nx.end(), nx.begin(), nx.end());
      all_ny.insert(all_ny.end(), ny.begin(), ny.end());
    }
    if (!complete) continue;

    ReportCell all;
    fill(all, all_rx, all_nx, all_ry, all_ny, is_baseline);
    all.failed = all_failed;
    all.invalid = static_cast<double>(all_failed) > kMaxFailedFraction * static_cast<double>(all.users);
    table.cells[{method, kAllColumn}] = all;

    if (table.datasets.size() > 1) {
      ReportCell macro;
      const double nd = static_cast<double>(table.datasets.size());
      macro.recall = macro_r / nd;
      macro.ndcg = macro_n / nd;
      macro.users = all.users;
      macro.failed = all.failed;
      macro.invalid = all.invalid;
      table.cells[{method, kMacroColumn}] = macro;
    }
  }
  return table;
}

std::string report_to_csv(const ReportTable& table) {
  std::string out =
      "method,dataset,users,failed,invalid,recall,recall_marker,ndcg,ndcg_marker,"
      "p_recall_greater,p_recall_less,p_ndcg_greater,p_ndcg_less\n";
  for (const auto& method : table.methods) {
    for (const auto& col : table.columns()) {
      auto it = table.cells.find({method, col});
      if (it == table.cells.end()) continue;
      const auto& c = it->second;
      out += method + "," + col + "," + std::to_string(c.users) + "," + std::to_string(c.failed) +
             "," + (c.invalid ? "true" : "false") + "," + fmt("%.6f", c.recall) + "," +
             c.recall_marker + "," + fmt("%.6f", c.ndcg) + "," + c.ndcg_marker + "," +
             fmt("%.6g", c.p_recall_greater) + "," + fmt("%.6g", c.p_recall_less) + "," +
             fmt("%.6g", c.p_ndcg_greater) + "," + fmt("%.6g", c.p_ndcg_less) + "\n";
    }
  }
  return out;
}

std::string report_to_text(const ReportTable& table) {
  const auto cols = table.columns();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head1{""}, head2{""};
  for (const auto& col : cols) {
    head1.push_back(col);
    head1.push_back("");
    head2.push_back("Recall@" + std::to_string(table.k));
    head2.push_back("nDCG@" + std::to_string(table.k));
  }
  rows.push_back(head1);
  rows.push_back(head2);
  for (const auto& method : table.methods) {
    std::vector<std::string> row{method};
    for (const auto& col : cols) {
      auto it = table.cells.find({method, col});
      if (it == table.cells.end()) {
        row.push_back("-");
        row.push_back("-");
        continue;
      }
      const auto& c = it->second;
      const std::string flag = c.invalid ? "!" : "";
      row.push_back(fmt("%.3f", c.recall) + c.recall_marker + flag);
      row.push_back(fmt("%.3f", c.ndcg) + c.ndcg_marker + flag);
    }
    rows.push_back(row);
  }

  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  // a dataset name spans its two metric columns
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::size_t a = 1 + 2 * c, b = a + 1;
    const std::size_t need = display_width(cols[c]);
    if (width[a] + 2 + width[b] < need) width[b] = need - width[a] - 2;
  }

  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line = pad(rows[r][0], width[0], true);
    for (std::size_t i = 1; i < rows[r].size(); i += 2) {
      if (r == 0) {
        line += " | " + pad(rows[r][i], width[i] + 2 + width[i + 1], true);
      } else {
        line += " | " + pad(rows[r][i], width[i], false) + "  " + pad(rows[r][i + 1], width[i + 1], false);
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 1) out += std::string(display_width(line), '-') + "\n";
  }
  out += "baseline: " + table.baseline + "; " + std::string(kMarkerHigher) + " / " +
         kMarkerLower + " = one-sided Wilcoxon signed-rank p <= " + fmt("%g", table.alpha) +
         "; ! = more than 5% failed tasks\n";
  for (const auto& w : table.warnings) out += "warning: " + w + "\n";
  return out;
}

std::string winloss_to_csv(const std::vector<RunResult>& results, const std::string& baseline) {
  std::string out = "dataset,pair,metric,a_wins,b_wins,same\n";
  std::map<std::string, const RunResult*> base;
  for (const auto& r : results)
    if (r.method == baseline) base[r.dataset] = &r;
  for (const auto& r : results) {
    if (r.method == baseline) continue;
    auto it = base.find(r.dataset);
    if (it == base.end()) continue;
    for (Metric metric : {Metric::Recall, Metric::Ndcg}) {
      const auto wl = win_loss_same(r, *it->second, metric);
      out += r.dataset + "," + r.method + " vs " + baseline + "," + to_string(metric) + "," +
             std::to_string(wl.a_wins) + "," + std::to_string(wl.b_wins) + "," +
             std::to_string(wl.same) + "\n";
    }
  }
  return out;
}

}  // namespace coldbench::eval
