#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "coldbench/bench/suite.hpp"
#include "coldbench/corpus/render.hpp"
#include "coldbench/dense/dense.hpp"
#include "coldbench/eval/ranking.hpp"
#include "coldbench/llm/client.hpp"
#include "coldbench/setsim/transport.hpp"

namespace coldbench::setsim {

enum class Side { User, Item };
enum class Representation { Raw, CQ, MQ };
enum class Similarity { MaxSum, EMD };

std::string to_string(Side side);
std::string to_string(Representation rep);
std::string to_string(Similarity sim);
Similarity similarity_from_string(const std::string& text);

/// User-side and item-side representation of a hybrid method.
struct Pairing {
  Representation user = Representation::Raw;
  Representation item = Representation::Raw;
};
/// Parses "Raw-Raw", "CQ-CQ", "CQ-Raw", "MQ-Raw" or "MQ-MQ" (case-insensitive).
Pairing pairing_from_string(const std::string& text);
std::string to_string(const Pairing& pairing);

/// K generated search queries for one text.
struct QuerySet {
  std::string source_text_hash;
  std::vector<std::string> queries;
  std::string model;
  std::string prompt_hash;
  std::vector<std::string> warnings;
};

/// Weighted vector set with uniform weights 1/K.
struct VectorSet {
  std::vector<dense::Vector> vectors;
  Representation provenance = Representation::Raw;

  std::size_t size() const { return vectors.size(); }
};

/// The query-expansion prompt for a user (profile or interacted item text)
/// or an item, with the domain name and K substituted.
std::string expansion_prompt(const std::string& subject_text, Side side,
                             const std::string& domain_name, int k);

/// Double-quoted strings in an LLM answer, trimmed, distinct, in order.
std::vector<std::string> parse_quoted_queries(std::string_view response);

/// Cache of generated query sets, persisted as queries.jsonl lines
/// {"text_hash", "side", "model", "K", "queries"}.
class QuerySetCache {
 public:
  QuerySetCache() = default;
  explicit QuerySetCache(const std::filesystem::path& file);

  std::optional<std::vector<std::string>> get(const std::string& text_hash, Side side,
                                              const std::string& model, int k) const;
  void put(const std::string& text_hash, Side side, const std::string& model, int k,
           const std::vector<std::string>& queries);

 private:
  static std::string key(const std::string& text_hash, Side side, const std::string& model,
                         int k);
  std::unordered_map<std::string, std::vector<std::string>> entries_;
  std::ofstream out_;
  mutable std::mutex mutex_;
};

/// Prompts the LLM for K queries. Fewer than K parsed triggers one re-prompt
/// asking for exactly K quoted queries; a remaining shortfall is padded by
/// repeating the last query and recorded as a warning. Throws ProviderError
/// when no query can be parsed at all.
QuerySet expand_queries(llm::LlmClient& llm, const std::string& subject_text, Side side,
                        const std::string& domain_name, int k, std::uint64_t seed = 0,
                        QuerySetCache* cache = nullptr);

/// Raw embeds raw_text; CQ embeds the queries joined by '\n'; MQ embeds each
/// query. Throws ConfigError if CQ/MQ is requested without queries.
VectorSet build_representation(Representation mode, const std::string& raw_text,
                               const QuerySet* queries, dense::Embedder& embedder,
                               dense::Role role);

/// sum_k max_l cos(u_k, v_l). Asymmetric: the sum runs over the user side.
double max_sum_similarity(const VectorSet& user, const VectorSet& item);

struct EmdOptions {
  SinkhornOptions sinkhorn;
  /// Solve uniform square problems up to this size exactly instead of by
  /// Sinkhorn (0 disables).
  std::size_t exact_assignment_max = 8;
};

/// 1 - w, where w is the optimal transport cost between the uniformly
/// weighted sets under ground cost 1 - cos. Singleton sides collapse to a
/// closed form; small square problems use the exact assignment; everything
/// else runs log-domain Sinkhorn with EmdOptions::sinkhorn.
double emd_similarity(const VectorSet& user, const VectorSet& item, const EmdOptions& options = {});

/// Ground cost matrix 1 - cos(u_k, v_l).
CostMatrix cosine_cost(const VectorSet& user, const VectorSet& item);

/// Supplies query sets during ranking; owns nothing but references.
struct QuerySource {
  llm::LlmClient* llm = nullptr;
  QuerySetCache* cache = nullptr;
  int k = 10;
  std::string domain_name;
  std::uint64_t seed = 0;
};

/// Each evidence text yields its own user-side set; a candidate's score is
/// the mean similarity over evidence texts. Ties break by ascending item id.
eval::Ranking rank_setsim(const bench::Task& task, const Pairing& pairing, Similarity sim,
                          const corpus::ItemCatalog& catalog, dense::Embedder& embedder,
                          const QuerySource& queries, const std::string& method = "setsim",
                          const EmdOptions& emd = {});

}  // namespace coldbench::setsim
