#include "coldbench/util/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

#include "coldbench/util/error.hpp"

namespace coldbench {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'
};

SplitUrl split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must start with http:// or https://: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = endpoint;
  } else {
    out.origin = endpoint.substr(0, path_start);
    out.prefix = endpoint.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers,
                         const RetryPolicy& policy) {
  const SplitUrl url = split_endpoint(endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(policy.timeout);
  client.set_read_timeout(policy.timeout);
  client.set_write_timeout(policy.timeout);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  const std::string payload = body.dump();
  const std::string full_path = url.prefix + path;

  auto backoff = policy.initial_backoff;
  int last_status = 0;
  std::string last_error;
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(full_path, hdrs, payload, "application/json");
    if (res) {
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
          throw ProviderError("malformed JSON from " + endpoint + full_path + ": " +
                                  e.what(),
                              res->status);
        }
      }
      last_error = "HTTP " + std::to_string(res->status);
      if (!retryable(res->status)) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * policy.backoff_factor));
    }
  }
  throw ProviderError("POST " + endpoint + path + " failed: " + last_error, last_status);
}

RateLimiter::RateLimiter(double tokens_per_second, double burst)
    : rate_(tokens_per_second),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(Clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    auto now = Clock::now();
    double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

}  // namespace coldbench
