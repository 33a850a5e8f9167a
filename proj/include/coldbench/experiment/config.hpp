#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "coldbench/corpus/dataset.hpp"
#include "coldbench/dense/dense.hpp"
#include "coldbench/llm/client.hpp"
#include "coldbench/sparse/bm25.hpp"

namespace coldbench::experiment {

struct DatasetSpec {
  std::string name;
  std::string path;  // as written; resolved against the config directory
  corpus::DatasetSchema schema;
};

enum class MethodKind { Bm25, Dense, SetSim, Llm, Random };
std::string to_string(MethodKind kind);

struct MethodSpec {
  std::string label;
  MethodKind kind = MethodKind::Bm25;

  sparse::Bm25Params bm25;

  // dense: provider is "http", "hashed-bow" or "store" (cache only)
  std::string provider;
  dense::EmbeddingProfile embedding;
  std::string api_key_env;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 8;

  // setsim
  std::string embedding_method;  // label of a dense method
  std::string llm_method;        // label of an llm method generating queries
  std::string pairing = "Raw-Raw";
  std::string similarity = "maxsum";
  int queries = 10;
  double reg = 1e-4;

  // llm: provider is "http", "fixed" or "cache" (cache only)
  llm::ChatSettings chat;
  std::string fixed_response;
  int top_k = 10;
  int retries = 2;
};

enum class ScenarioKind { Narrow, Broad, Sweep, Cross };
std::string to_string(ScenarioKind kind);

struct CrossPair {
  std::string source;
  std::string target;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Narrow;
  std::vector<int> m{0};
  std::vector<int> L{50};
  std::vector<CrossPair> pairs;  // cross only
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int n_users = 500;
  std::size_t k = 10;
  std::string baseline;
  double alpha = 1e-4;
  bool fixed_user_panel = true;
  std::string cache_dir;  // empty: <out>/cache
  std::vector<DatasetSpec> datasets;
  std::vector<MethodSpec> methods;
  ScenarioSpec scenario;
  std::filesystem::path base_dir;  // directory of the config file

  const DatasetSpec& dataset(const std::string& name) const;
  const MethodSpec& method(const std::string& label) const;
  std::filesystem::path resolve(const std::string& path) const;
};

/// Parses a TOML document. Throws ConfigError on syntax or schema errors.
ExperimentConfig parse_config(std::string_view toml_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError on inconsistencies: duplicate labels, unknown
/// references, narrow scenarios with m != 0, k > L, missing baseline.
void validate(const ExperimentConfig& config);

/// Canonical JSON form; everything that influences results and nothing else.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

/// First 16 hex digits of SHA-256 over the canonical JSON.
std::string config_hash(const ExperimentConfig& config);

}  // namespace coldbench::experiment
