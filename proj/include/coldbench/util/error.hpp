#pragma once

#include <stdexcept>
#include <string>

namespace coldbench {

// Base for every error the harness raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a schema or integrity rule.
class DataError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A remote provider (embedding or chat) failed after retries.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// A provider call was needed while running with --offline.
class OfflineError : public ProviderError {
 public:
  explicit OfflineError(const std::string& what) : ProviderError(what) {}
};

}  // namespace coldbench
