#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>

namespace coldbench {

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::chrono::seconds timeout{120};
};

/// POSTs a JSON body to endpoint + path and returns the parsed response.
///
/// endpoint is "http(s)://host[:port][/prefix]". Connection failures, 429 and
/// 5xx responses are retried with exponential backoff up to
/// policy.max_attempts; any other non-2xx status fails immediately.
/// Throws ProviderError carrying the last HTTP status.
nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers,
                         const RetryPolicy& policy);

/// Token bucket: acquire() blocks until one token is available.
/// A rate of zero or less disables limiting.
class RateLimiter {
 public:
  RateLimiter(double tokens_per_second, double burst);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

}  // namespace coldbench
