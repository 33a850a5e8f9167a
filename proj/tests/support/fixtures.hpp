#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "coldbench/corpus/dataset.hpp"
#include "coldbench/llm/client.hpp"

namespace httplib {
class Server;
}

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct PlantedOptions {
  int users = 200;
  int items_per_user = 16;
  int filler_vocab = 400;
  int filler_words = 5;
  std::uint64_t seed = 1;
  std::string domain = "planted";
};

/// Every user owns a rare token shared by their profile and all their
/// items; filler words are drawn from a common vocabulary. Positives are
/// therefore recoverable by keyword overlap while negatives are not.
coldbench::corpus::Dataset planted_dataset(const PlantedOptions& options = {});

struct RandomOptions {
  int users = 1000;
  int items = 2000;
  int min_history = 3;
  int max_history = 25;
  double repeat_rate = 0.05;  // chance an interaction repeats an earlier item
  double tie_rate = 0.1;      // chance a timestamp equals the previous one
  std::uint64_t seed = 1;
  std::string domain = "random";
  std::string user_prefix = "u";
};

/// Random interaction logs with repeated items and timestamp ties.
coldbench::corpus::Dataset random_dataset(const RandomOptions& options = {});

/// LLM stand-in answering through a callback; records every prompt.
class ScriptedLlm : public coldbench::llm::LlmClient {
 public:
  using Script = std::function<std::string(const std::string& prompt, std::size_t call)>;
  ScriptedLlm(std::string model, Script script) : model_(std::move(model)), script_(std::move(script)) {}
  std::string complete(const std::string& prompt) override;
  const std::string& model() const override { return model_; }
  std::vector<std::string> prompts() const;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::string model_;
  Script script_;
  mutable std::mutex mutex_;
  std::vector<std::string> prompts_;
  std::atomic<std::size_t> calls_{0};
};

/// Local HTTP server for wire-protocol tests. Handlers receive the JSON
/// request body text and return (status, body).
class MockServer {
 public:
  using Handler = std::function<std::pair<int, std::string>(const std::string& body)>;
  MockServer();
  ~MockServer();
  void on_post(const std::string& path, Handler handler);
  void start();
  std::string endpoint() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace testing_support
