#include "coldbench/dense/providers.hpp"

#include <algorithm>

#include "coldbench/sparse/bm25.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::dense {

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::string api_key,
                                             RetryPolicy retry, std::size_t batch_size)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      retry_(retry),
      batch_size_(std::clamp<std::size_t>(batch_size, 1, 64)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    const std::string& model, const std::vector<std::string>& inputs) {
  std::vector<std::vector<double>> out;
  out.reserve(inputs.size());
  std::map<std::string, std::string> headers;
  if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;

  for (std::size_t start = 0; start < inputs.size(); start += batch_size_) {
    const std::size_t end = std::min(inputs.size(), start + batch_size_);
    nlohmann::json body = {
        {"model", model},
        {"input", std::vector<std::string>(inputs.begin() + static_cast<std::ptrdiff_t>(start),
                                           inputs.begin() + static_cast<std::ptrdiff_t>(end))}};
    ++requests_;
    auto response = post_json(endpoint_, "/v1/embeddings", body, headers, retry_);
    if (!response.contains("data") || !response["data"].is_array()) {
      throw ProviderError("embedding response without data array");
    }
    const std::size_t n = end - start;
    std::vector<std::vector<double>> batch(n);
    std::vector<bool> filled(n, false);
    for (const auto& entry : response["data"]) {
      const auto index = entry.value("index", std::size_t{n});
      if (index >= n || filled[index] || !entry.contains("embedding")) {
        throw ProviderError("embedding response has invalid or repeated index");
      }
      batch[index] = entry["embedding"].get<std::vector<double>>();
      filled[index] = true;
    }
    if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
      throw ProviderError("embedding response is missing entries");
    }
    for (auto& v : batch) out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> HashedBowProvider::embed(
    const std::string&, const std::vector<std::string>& inputs) {
  ++calls_;
  std::vector<std::vector<double>> out;
  out.reserve(inputs.size());
  for (const auto& text : inputs) {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& tok : sparse::tokenize(text)) {
      const std::uint64_t h = fnv1a64(tok);
      const double sign = (h >> 63) ? -1.0 : 1.0;
      v[h % dimension_] += sign;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace coldbench::dense
