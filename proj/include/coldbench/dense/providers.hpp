#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "coldbench/util/http.hpp"

namespace coldbench::dense {

/// Source of raw embeddings. Implementations must return one vector per
/// input, in input order, and be safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(const std::string& model,
                                                 const std::vector<std::string>& inputs) = 0;
  /// Largest batch a single embed() call accepts.
  virtual std::size_t max_batch() const { return 64; }
};

/// OpenAI-compatible client: POST {endpoint}/v1/embeddings with
/// {"model", "input": [...]}, reading data[].embedding ordered by data[].index.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string api_key = {},
                        RetryPolicy retry = {}, std::size_t batch_size = 64);

  std::vector<std::vector<double>> embed(const std::string& model,
                                         const std::vector<std::string>& inputs) override;
  std::size_t max_batch() const override { return batch_size_; }

  std::size_t request_count() const { return requests_.load(); }

 private:
  std::string endpoint_;
  std::string api_key_;
  RetryPolicy retry_;
  std::size_t batch_size_;
  std::atomic<std::size_t> requests_{0};
};

/// Offline provider: signed feature hashing of the BM25 tokenizer's tokens
/// into `dimension` buckets. Texts sharing rare tokens get high cosine, which
/// makes it a transparent stand-in for a real model in tests and smoke runs.
class HashedBowProvider : public EmbeddingProvider {
 public:
  explicit HashedBowProvider(std::size_t dimension) : dimension_(dimension) {}
  std::vector<std::vector<double>> embed(const std::string& model,
                                         const std::vector<std::string>& inputs) override;
  std::size_t call_count() const { return calls_.load(); }

 private:
  std::size_t dimension_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace coldbench::dense
