#include "coldbench/llm/client.hpp"

#include <nlohmann/json.hpp>

#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::llm {

HttpChatClient::HttpChatClient(ChatSettings settings)
    : settings_(std::move(settings)),
      limiter_(settings_.requests_per_second, std::max(1.0, settings_.requests_per_second)),
      in_flight_(std::clamp(settings_.max_concurrent, 1, 64)) {}

std::string HttpChatClient::complete(const std::string& prompt) {
  nlohmann::json body = {
      {"model", settings_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", settings_.temperature}};
  std::map<std::string, std::string> headers;
  if (!settings_.api_key.empty()) headers["Authorization"] = "Bearer " + settings_.api_key;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  limiter_.acquire();
  ++requests_;
  auto response = post_json(settings_.endpoint, "/v1/chat/completions", body, headers,
                            settings_.retry);
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : content.dump();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("chat response without choices[0].message.content");
  }
}

ResponseCache::ResponseCache(const std::filesystem::path& file) {
  if (std::filesystem::exists(file)) {
    for_each_line(file, [&](std::string_view line, std::size_t) {
      if (line.empty()) return;
      auto row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.contains("key_hash") || !row.contains("response")) return;
      entries_.emplace(row["key_hash"].get<std::string>(), row["response"].get<std::string>());
    });
  } else if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  out_.open(file, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open LLM cache " + file.string());
}

std::string ResponseCache::key(const std::string& model, const std::string& prompt) {
  return sha256_hex(model + "\n" + prompt);
}

std::optional<std::string> ResponseCache::get(const std::string& model,
                                              const std::string& prompt) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key(model, prompt));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& model, const std::string& prompt,
                        const std::string& response) {
  const std::string k = key(model, prompt);
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(k, response).second) return;
  if (out_.is_open()) {
    nlohmann::json row = {
        {"key_hash", k}, {"model", model}, {"prompt", prompt}, {"response", response}};
    out_ << row.dump() << '\n';
    out_.flush();
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

CachedLlmClient::CachedLlmClient(std::string model, ResponseCache& cache, LlmClient* inner)
    : model_(std::move(model)), cache_(cache), inner_(inner) {}

std::string CachedLlmClient::complete(const std::string& prompt) {
  if (auto hit = cache_.get(model_, prompt)) return *hit;
  ++misses_;
  if (!inner_) throw OfflineError("LLM cache miss for model " + model_ + " while offline");
  std::string response = inner_->complete(prompt);
  cache_.put(model_, prompt, response);
  return response;
}

}  // namespace coldbench::llm
