#include "coldbench/bench/validate.hpp"

#include <algorithm>
#include <unordered_set>

namespace coldbench::bench {

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::ConfigMismatch: return "config_mismatch";
    case ViolationKind::DuplicateUser: return "duplicate_user";
    case ViolationKind::UnknownUser: return "unknown_user";
    case ViolationKind::UnknownItem: return "unknown_item";
    case ViolationKind::CandidateCount: return "candidate_count";
    case ViolationKind::DuplicateCandidate: return "duplicate_candidate";
    case ViolationKind::PositiveCount: return "positive_count";
    case ViolationKind::PositiveNotCandidate: return "positive_not_candidate";
    case ViolationKind::Leakage: return "leakage";
    case ViolationKind::EvidenceOverlap: return "evidence_overlap";
    case ViolationKind::PositiveRecency: return "positive_recency";
    case ViolationKind::EvidenceRecency: return "evidence_recency";
  }
  return "?";
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_suite(const BenchmarkSuite& suite, const corpus::Dataset& dataset,
                                const corpus::Dataset* source) {
  ValidationReport report;
  const auto& cfg = suite.config;
  std::unordered_set<std::string> users_seen;

  for (const auto& task : suite.tasks) {
    ++report.tasks_checked;
    auto flag = [&](ViolationKind kind, std::string detail) {
      report.violations.push_back({task.user_id, kind, std::move(detail)});
    };

    if (!users_seen.insert(task.user_id).second) flag(ViolationKind::DuplicateUser, "");

    const bool history_mode = task.mode != Mode::Narrow;
    const auto* history = std::get_if<HistoryEvidence>(&task.evidence);
    if (task.mode != cfg.mode || history_mode != (history != nullptr) ||
        (history && static_cast<int>(history->item_ids.size()) != cfg.m) ||
        (history && history->item_ids.size() != history->texts.size())) {
      flag(ViolationKind::ConfigMismatch, "mode or evidence size differs from suite config");
    }

    const auto* user = dataset.find_user(task.user_id);
    if (!user) {
      flag(ViolationKind::UnknownUser, "");
      continue;
    }

    if (static_cast<int>(task.candidate_ids.size()) != cfg.L) {
      flag(ViolationKind::CandidateCount, std::to_string(task.candidate_ids.size()) +
                                              " candidates, expected " + std::to_string(cfg.L));
    }
    std::unordered_set<std::string> candidates;
    for (const auto& id : task.candidate_ids) {
      if (!candidates.insert(id).second) flag(ViolationKind::DuplicateCandidate, id);
      if (!dataset.find_item(id)) flag(ViolationKind::UnknownItem, id);
    }

    std::unordered_set<std::string> positives(task.positive_ids.begin(), task.positive_ids.end());
    if (task.positive_ids.size() != kPositives || positives.size() != kPositives) {
      flag(ViolationKind::PositiveCount, std::to_string(task.positive_ids.size()) + " positives");
    }
    for (const auto& p : task.positive_ids) {
      if (!candidates.count(p)) flag(ViolationKind::PositiveNotCandidate, p);
    }

    const auto recent = recent_distinct_items(*user);
    const std::unordered_set<std::string> full_history(recent.begin(), recent.end());
    for (const auto& id : task.candidate_ids) {
      if (!positives.count(id) && full_history.count(id)) flag(ViolationKind::Leakage, id);
    }

    std::vector<std::string> expected_pos;
    for (std::size_t i = std::min<std::size_t>(kPositives, recent.size()); i-- > 0;) {
      expected_pos.push_back(recent[i]);
    }
    if (expected_pos != task.positive_ids) {
      flag(ViolationKind::PositiveRecency, "positives are not the 3 most recent interactions");
    }

    if (history) {
      if (task.mode != Mode::Cross) {
        for (const auto& id : history->item_ids) {
          if (candidates.count(id)) flag(ViolationKind::EvidenceOverlap, id);
        }
      }
      // Expected evidence: the next m distinct items by recency (broad) or the
      // m most recent source-domain items (cross), oldest first.
      std::vector<std::string> expected_ev;
      const std::vector<std::string>* pool = &recent;
      std::size_t offset = kPositives;
      std::vector<std::string> source_recent;
      if (task.mode == Mode::Cross) {
        const auto* src_user = source ? source->find_user(task.user_id) : nullptr;
        if (src_user) source_recent = recent_distinct_items(*src_user);
        pool = &source_recent;
        offset = 0;
      }
      if (task.mode != Mode::Cross || source) {
        const std::size_t m = history->item_ids.size();
        if (pool->size() >= offset + m) {
          for (std::size_t j = offset + m; j-- > offset;) expected_ev.push_back((*pool)[j]);
        }
        if (expected_ev != history->item_ids) {
          flag(ViolationKind::EvidenceRecency,
               "evidence is not the expected recency block (oldest first)");
        }
      }
    }
  }
  return report;
}

}  // namespace coldbench::bench
