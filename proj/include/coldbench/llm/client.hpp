#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>

#include "coldbench/util/http.hpp"

namespace coldbench::llm {

/// A chat model answering one user message with text.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual const std::string& model() const = 0;
};

struct ChatSettings {
  std::string endpoint;
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  int max_concurrent = 4;
  double requests_per_second = 0;  // 0 disables rate limiting
  RetryPolicy retry;
};

/// OpenAI-compatible chat client: POST {endpoint}/v1/chat/completions with a
/// single user message; the answer is choices[0].message.content.
class HttpChatClient : public LlmClient {
 public:
  explicit HttpChatClient(ChatSettings settings);

  std::string complete(const std::string& prompt) override;
  const std::string& model() const override { return settings_.model; }
  std::size_t request_count() const { return requests_.load(); }

 private:
  ChatSettings settings_;
  RateLimiter limiter_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::size_t> requests_{0};
};

/// Response cache keyed by SHA-256(model + "\n" + prompt), persisted as
/// llm_cache.jsonl lines {"key_hash", "model", "prompt", "response"}.
/// Shared by reranking and query expansion.
class ResponseCache {
 public:
  ResponseCache() = default;  // in-memory only
  explicit ResponseCache(const std::filesystem::path& file);

  static std::string key(const std::string& model, const std::string& prompt);

  std::optional<std::string> get(const std::string& model, const std::string& prompt) const;
  void put(const std::string& model, const std::string& prompt, const std::string& response);
  std::size_t size() const;

 private:
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
  mutable std::mutex mutex_;
};

/// Serves cached answers and forwards misses to an inner client. With no
/// inner client (offline runs) a miss throws OfflineError.
class CachedLlmClient : public LlmClient {
 public:
  CachedLlmClient(std::string model, ResponseCache& cache, LlmClient* inner);

  std::string complete(const std::string& prompt) override;
  const std::string& model() const override { return model_; }
  std::size_t miss_count() const { return misses_.load(); }

 private:
  std::string model_;
  ResponseCache& cache_;
  LlmClient* inner_;
  std::atomic<std::size_t> misses_{0};
};

/// Answers every prompt with the same text. Useful as an offline stand-in.
class FixedResponseClient : public LlmClient {
 public:
  FixedResponseClient(std::string model, std::string response)
      : model_(std::move(model)), response_(std::move(response)) {}
  std::string complete(const std::string&) override { return response_; }
  const std::string& model() const override { return model_; }

 private:
  std::string model_;
  std::string response_;
};

}  // namespace coldbench::llm
