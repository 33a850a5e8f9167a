#pragma once

#include <string>
#include <vector>

#include "coldbench/bench/suite.hpp"

namespace coldbench::bench {

enum class ViolationKind {
  ConfigMismatch,       // task mode or evidence size differs from the suite config
  DuplicateUser,
  UnknownUser,
  UnknownItem,
  CandidateCount,
  DuplicateCandidate,
  PositiveCount,
  PositiveNotCandidate,
  Leakage,              // a negative occurs in the user's history
  EvidenceOverlap,      // an evidence item is also a candidate
  PositiveRecency,      // positives are not the most recent interactions
  EvidenceRecency,      // evidence is not the next-most-recent block, oldest first
};

std::string to_string(ViolationKind kind);

struct Violation {
  std::string user_id;
  ViolationKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t tasks_checked = 0;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

/// Checks every task invariant against the dataset the suite was drawn from.
/// For cross-domain suites pass the target as `dataset` and the evidence
/// domain as `source`.
ValidationReport validate_suite(const BenchmarkSuite& suite, const corpus::Dataset& dataset,
                                const corpus::Dataset* source = nullptr);

}  // namespace coldbench::bench
