#pragma once

#include <string>
#include <vector>

#include "coldbench/bench/suite.hpp"
#include "coldbench/corpus/render.hpp"
#include "coldbench/eval/ranking.hpp"
#include "coldbench/llm/client.hpp"

namespace coldbench::llm {

struct RerankRequest {
  std::string user_id;
  /// permutation[p] is the candidate shown at display position p + 1.
  std::vector<std::string> permutation;
  std::string prompt;
  std::uint64_t seed = 0;
  int top_k = 10;
};

/// Candidates are shuffled with a stream derived from seed and listed as
/// {1: text, 2: text, ...}. top_k is clamped to the candidate count.
RerankRequest build_rerank_prompt(const bench::Task& task, const corpus::ItemCatalog& catalog,
                                  std::uint64_t seed, int top_k = 10);

enum class ParseStatus { Clean, Repaired, Fallback };
std::string to_string(ParseStatus status);

enum class Repair { OutOfRange, Duplicate, Truncated, Partial };
std::string to_string(Repair repair);

struct ParsedList {
  std::vector<int> positions;  // 1-based display positions
  ParseStatus status = ParseStatus::Fallback;
  std::vector<Repair> repairs;
};

/// Finds the first bracketed list of integers in raw and repairs it: ids
/// outside 1..L are dropped, repeats keep their first occurrence, the list
/// is cut to K, and a shorter list is accepted as partial. No list, or
/// nothing left after repairs, is a fallback.
ParsedList parse_rerank_output(std::string_view raw, int L, int K = 10);

struct RerankOutcome {
  eval::Ranking ranking;
  ParseStatus status = ParseStatus::Fallback;
  std::vector<Repair> repairs;
  std::string raw_response;
  int attempts = 0;
};

/// Prompts, parses and maps positions back to item ids; the remaining
/// candidates follow in display order. A fallback parse is retried with a
/// fresh shuffle up to `retries` times; if every attempt falls back the
/// last display order is returned. Transport errors propagate.
RerankOutcome rerank_with_llm(LlmClient& client, const bench::Task& task,
                              const corpus::ItemCatalog& catalog, std::uint64_t seed,
                              int retries = 2, int top_k = 10, const std::string& method = "llm");

}  // namespace coldbench::llm
