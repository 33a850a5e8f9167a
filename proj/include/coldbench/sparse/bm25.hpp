#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coldbench/bench/suite.hpp"
#include "coldbench/eval/ranking.hpp"

namespace coldbench::sparse {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  /// Count each query term once regardless of how often it repeats.
  bool query_term_presence = true;
};

/// Lowercase ASCII, split on anything that is not [a-z0-9], drop empties.
/// Bytes >= 0x80 are kept as token characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Okapi BM25 statistics over a fixed document collection.
class Bm25Index {
 public:
  /// Throws DataError on an empty corpus.
  static Bm25Index build(const std::unordered_map<std::string, std::string>& doc_texts,
                         Bm25Params params = {});

  /// sum over query terms t of idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b dl / avgdl)),
  /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)). Throws DataError on an
  /// unknown doc id.
  double score(std::string_view query_text, const std::string& doc_id) const;

  /// Scores a pre-tokenized query.
  double score_terms(const std::vector<std::string>& query_terms, const std::string& doc_id) const;

  double idf(const std::string& term) const;
  std::size_t document_frequency(const std::string& term) const;
  std::size_t doc_length(const std::string& doc_id) const;
  std::size_t size() const { return docs_.size(); }
  double average_doc_length() const { return avgdl_; }
  const Bm25Params& params() const { return params_; }

 private:
  struct Doc {
    std::unordered_map<std::string, std::size_t> tf;
    std::size_t length = 0;
  };
  Bm25Params params_;
  std::unordered_map<std::string, Doc> docs_;
  std::unordered_map<std::string, std::size_t> df_;
  double avgdl_ = 0;
};

/// User text: the profile (narrow) or the evidence item texts joined by a
/// single space (broad and cross).
std::string user_query_text(const bench::Task& task);

eval::Ranking rank_bm25(const Bm25Index& index, const bench::Task& task);

}  // namespace coldbench::sparse
