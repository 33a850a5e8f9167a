#include "coldbench/dense/dense.hpp"

#include <cmath>
#include <future>
#include <unordered_map>

#include "coldbench/util/error.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::dense {

std::string content_hash(const std::string& prefixed_text) { return sha256_hex(prefixed_text); }

Embedder::Embedder(EmbeddingProfile profile, EmbeddingStore& store, EmbeddingProvider* provider,
                   std::size_t max_in_flight)
    : profile_(std::move(profile)),
      store_(store),
      provider_(provider),
      max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

std::vector<Vector> Embedder::embed_texts(const std::vector<std::string>& texts, Role role) {
  const std::string& prefix =
      role == Role::Query ? profile_.query_prefix : profile_.passage_prefix;
  const std::string& model = profile_.model_name;

  std::vector<std::string> hashes;
  hashes.reserve(texts.size());
  std::vector<std::string> miss_texts;
  std::vector<std::string> miss_hashes;
  std::unordered_map<std::string, bool> queued;
  for (const auto& text : texts) {
    std::string prefixed = prefix + text;
    hashes.push_back(content_hash(prefixed));
    if (!store_.contains(model, hashes.back()) && queued.emplace(hashes.back(), true).second) {
      miss_texts.push_back(std::move(prefixed));
      miss_hashes.push_back(hashes.back());
    }
  }

  if (!miss_texts.empty()) {
    if (!provider_) {
      throw OfflineError("embedding cache miss for model " + model + " (" +
                         std::to_string(miss_texts.size()) + " texts) and no provider available");
    }
    const std::size_t batch = std::max<std::size_t>(1, provider_->max_batch());
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t s = 0; s < miss_texts.size(); s += batch) {
      ranges.emplace_back(s, std::min(miss_texts.size(), s + batch));
    }
    // Batches run in windows of max_in_flight; results are committed in
    // input order so the store's append order is deterministic.
    for (std::size_t w = 0; w < ranges.size(); w += max_in_flight_) {
      const std::size_t w_end = std::min(ranges.size(), w + max_in_flight_);
      std::vector<std::future<std::vector<std::vector<double>>>> pending;
      for (std::size_t r = w; r < w_end; ++r) {
        std::vector<std::string> chunk(
            miss_texts.begin() + static_cast<std::ptrdiff_t>(ranges[r].first),
            miss_texts.begin() + static_cast<std::ptrdiff_t>(ranges[r].second));
        if (w_end - w == 1) {
          std::promise<std::vector<std::vector<double>>> p;
          p.set_value(provider_->embed(model, chunk));
          pending.push_back(p.get_future());
        } else {
          pending.push_back(std::async(std::launch::async, [this, &model, chunk = std::move(chunk)] {
            return provider_->embed(model, chunk);
          }));
        }
      }
      for (std::size_t r = w; r < w_end; ++r) {
        auto vectors = pending[r - w].get();
        const std::size_t expected = ranges[r].second - ranges[r].first;
        if (vectors.size() != expected) {
          throw ProviderError("provider returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(expected) + " inputs");
        }
        for (std::size_t i = 0; i < vectors.size(); ++i) {
          if (vectors[i].size() != profile_.dimension) {
            throw DataError("dimension mismatch for model " + model + ": got " +
                            std::to_string(vectors[i].size()) + ", profile declares " +
                            std::to_string(profile_.dimension));
          }
          Vector v(vectors[i].begin(), vectors[i].end());
          store_.put(model, miss_hashes[ranges[r].first + i], v);
        }
      }
    }
  }

  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& h : hashes) {
    auto v = store_.get(model, h);
    if (!v) throw Error("embedding store lost entry " + h);
    if (v->size() != profile_.dimension) {
      throw DataError("cached vector for model " + model + " has dimension " +
                      std::to_string(v->size()) + ", profile declares " +
                      std::to_string(profile_.dimension));
    }
    out.push_back(std::move(*v));
  }
  return out;
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> x, std::span<const T> y) {
  if (x.size() != y.size()) {
    throw DataError("cosine: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  double dot = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i], b = y[i];
    dot += a * b;
    nx += a * a;
    ny += b * b;
  }
  if (nx <= 0 || ny <= 0) throw DataError("cosine: zero-norm vector");
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

}  // namespace

double cosine(std::span<const float> x, std::span<const float> y) { return cosine_impl(x, y); }
double cosine(std::span<const double> x, std::span<const double> y) { return cosine_impl(x, y); }

double dense_user_score(const std::vector<Vector>& user_vectors, const Vector& item_vector) {
  if (user_vectors.empty()) throw DataError("dense_user_score: no user vectors");
  double total = 0;
  for (const auto& u : user_vectors) total += cosine(u, item_vector);
  return total / static_cast<double>(user_vectors.size());
}

eval::Ranking rank_dense(const bench::Task& task, const corpus::ItemCatalog& catalog,
                         Embedder& embedder, const std::string& method) {
  const auto user_vectors = embedder.embed_texts(bench::evidence_texts(task), Role::Query);
  std::vector<std::string> item_texts;
  item_texts.reserve(task.candidate_ids.size());
  for (const auto& id : task.candidate_ids) item_texts.push_back(catalog.text(id));
  const auto item_vectors = embedder.embed_texts(item_texts, Role::Passage);

  std::vector<double> scores;
  scores.reserve(item_vectors.size());
  for (const auto& v : item_vectors) scores.push_back(dense_user_score(user_vectors, v));
  return {task.user_id, eval::order_by_score(task.candidate_ids, scores), method, task.seed};
}

}  // namespace coldbench::dense
