#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "coldbench/corpus/dataset.hpp"

namespace coldbench::bench {

/// Held-out positives per task.
inline constexpr int kPositives = 3;

enum class Mode { Narrow, Broad, Cross };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& text);

struct ProfileEvidence {
  std::string text;

  bool operator==(const ProfileEvidence&) const = default;
};

/// m history items, oldest first.
struct HistoryEvidence {
  std::vector<std::string> item_ids;
  std::vector<std::string> texts;

  bool operator==(const HistoryEvidence&) const = default;
};

using Evidence = std::variant<ProfileEvidence, HistoryEvidence>;

struct Task {
  std::string user_id;
  Mode mode = Mode::Narrow;
  Evidence evidence;
  std::vector<std::string> candidate_ids;  // L ids, shuffled display order
  std::vector<std::string> positive_ids;   // kPositives ids, oldest first
  std::string domain_name;                 // candidate domain
  std::string source_domain;               // evidence domain (cross only)
  std::uint64_t seed = 0;                  // per-task seed, < 2^53

  bool operator==(const Task&) const = default;
};

/// Evidence texts as the sparse, dense and LLM methods consume them.
std::vector<std::string> evidence_texts(const Task& task);

struct SuiteConfig {
  Mode mode = Mode::Narrow;
  int m = 0;          // evidence size (m' in cross mode)
  int L = 50;         // candidates per task
  int n_users = 500;
  std::uint64_t seed = 0;
  /// Draw the user panel from a stream that does not depend on m, L or mode,
  /// so sweeps over m compare the same users where eligibility allows.
  bool fixed_user_panel = true;
  /// Eligibility floor on history size used for panel selection; set it to
  /// the largest m of a sweep to get identical panels at every m.
  int panel_min_history = 0;
  /// Item fields rendered into evidence texts (empty = stored order).
  std::vector<std::string> item_fields;

  bool operator==(const SuiteConfig&) const = default;
};

struct BenchmarkSuite {
  std::vector<Task> tasks;  // sorted by user_id
  SuiteConfig config;
  std::string dataset_fingerprint;
  std::string source_fingerprint;  // cross mode only
  std::vector<std::string> warnings;
};

/// Narrow (m = 0, profile evidence) or broad (m >= 1, history evidence)
/// cold-start tasks. Throws ConfigError on inconsistent configuration.
BenchmarkSuite build_tasks(const corpus::Dataset& dataset, const SuiteConfig& config);

/// Evidence from the source domain, candidates and positives from the target
/// domain, for users present in both. Throws DataError if no user id is shared.
BenchmarkSuite build_cross_domain_tasks(const corpus::Dataset& source,
                                        const corpus::Dataset& target,
                                        const SuiteConfig& config);

/// Item ids a user interacted with, distinct, most recent first. Among equal
/// timestamps the later input row counts as more recent.
std::vector<std::string> recent_distinct_items(const corpus::UserRecord& user);

// tasks.jsonl / suite.json
std::string tasks_to_jsonl(const BenchmarkSuite& suite);
std::string suite_meta_json(const BenchmarkSuite& suite);
void write_suite(const BenchmarkSuite& suite, const std::filesystem::path& dir);
BenchmarkSuite read_suite(const std::filesystem::path& dir);
Task task_from_json_line(std::string_view line);

}  // namespace coldbench::bench
