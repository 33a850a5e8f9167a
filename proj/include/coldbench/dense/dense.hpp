#pragma once

#include <span>
#include <string>
#include <vector>

#include "coldbench/bench/suite.hpp"
#include "coldbench/corpus/render.hpp"
#include "coldbench/dense/embedding_store.hpp"
#include "coldbench/dense/providers.hpp"
#include "coldbench/eval/ranking.hpp"

namespace coldbench::dense {

/// How one embedding model is addressed. Role prefixes are configuration,
/// e.g. "query: " / "passage: " for e5-style models; the harness never
/// hardcodes model-specific strings.
struct EmbeddingProfile {
  std::string model_name;
  std::size_t dimension = 0;
  std::string query_prefix;
  std::string passage_prefix;
  std::string endpoint;
};

enum class Role { Query, Passage };

/// Cache key of a text: SHA-256 of the UTF-8 bytes of prefix + text.
std::string content_hash(const std::string& prefixed_text);

/// Embeds texts through a profile, a store and an optional provider.
class Embedder {
 public:
  /// provider may be null, in which case every text must already be cached.
  Embedder(EmbeddingProfile profile, EmbeddingStore& store, EmbeddingProvider* provider,
           std::size_t max_in_flight = 8);

  /// Prepends the role's prefix exactly once, serves cache hits from the
  /// store and sends misses to the provider in batches, with at most
  /// max_in_flight batches outstanding. Output order matches input order.
  /// Throws DataError on a dimension mismatch and OfflineError when a miss
  /// has no provider.
  std::vector<Vector> embed_texts(const std::vector<std::string>& texts, Role role);

  Vector embed_one(const std::string& text, Role role) { return embed_texts({text}, role)[0]; }

  const EmbeddingProfile& profile() const { return profile_; }

 private:
  EmbeddingProfile profile_;
  EmbeddingStore& store_;
  EmbeddingProvider* provider_;
  std::size_t max_in_flight_;
};

/// <x, y> / (|x| |y|), accumulated in double. Throws DataError on a
/// dimension mismatch or a zero-norm vector.
double cosine(std::span<const float> x, std::span<const float> y);
double cosine(std::span<const double> x, std::span<const double> y);

/// Mean cosine between each user vector and the item vector. Throws
/// DataError when user_vectors is empty.
double dense_user_score(const std::vector<Vector>& user_vectors, const Vector& item_vector);

/// Narrow tasks embed the profile as the single user vector; history tasks
/// embed each evidence item separately. Candidates are embedded as passages.
eval::Ranking rank_dense(const bench::Task& task, const corpus::ItemCatalog& catalog,
                         Embedder& embedder, const std::string& method = "dense");

}  // namespace coldbench::dense
