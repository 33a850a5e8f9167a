#include "coldbench/experiment/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <tomlplusplus/toml.hpp>

#include "coldbench/setsim/setsim.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::experiment {

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Bm25: return "bm25";
    case MethodKind::Dense: return "dense";
    case MethodKind::SetSim: return "setsim";
    case MethodKind::Llm: return "llm";
    case MethodKind::Random: return "random";
  }
  return "?";
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Narrow: return "narrow";
    case ScenarioKind::Broad: return "broad";
    case ScenarioKind::Sweep: return "sweep";
    case ScenarioKind::Cross: return "cross";
  }
  return "?";
}

const DatasetSpec& ExperimentConfig::dataset(const std::string& name) const {
  for (const auto& d : datasets)
    if (d.name == name) return d;
  throw ConfigError("unknown dataset '" + name + "'");
}

const MethodSpec& ExperimentConfig::method(const std::string& label) const {
  for (const auto& m : methods)
    if (m.label == label) return m;
  throw ConfigError("unknown method '" + label + "'");
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

template <typename T>
T get(const toml::table& t, const std::string& key, T fallback, const std::string& where) {
  const toml::node* node = t.get(key);
  if (!node) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) return *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = node->value<double>()) return static_cast<T>(*v);
  } else {
    if (auto v = node->value<std::int64_t>()) {
      if (*v < 0 && std::is_unsigned_v<T>) fail(where, "'" + key + "' must not be negative");
      return static_cast<T>(*v);
    }
  }
  fail(where, "'" + key + "' has the wrong type");
}

std::vector<std::string> get_strings(const toml::table& t, const std::string& key,
                                     const std::string& where) {
  std::vector<std::string> out;
  const toml::node* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) fail(where, "'" + key + "' must be an array of strings");
  for (const auto& el : *arr) {
    auto v = el.value<std::string>();
    if (!v) fail(where, "'" + key + "' must be an array of strings");
    out.push_back(*v);
  }
  return out;
}

std::vector<int> get_ints(const toml::table& t, const std::string& key, std::vector<int> fallback,
                          const std::string& where) {
  const toml::node* node = t.get(key);
  if (!node) return fallback;
  std::vector<int> out;
  if (auto v = node->value<std::int64_t>()) {
    out.push_back(static_cast<int>(*v));
    return out;
  }
  const auto* arr = node->as_array();
  if (!arr) fail(where, "'" + key + "' must be an integer or an array of integers");
  for (const auto& el : *arr) {
    auto v = el.value<std::int64_t>();
    if (!v) fail(where, "'" + key + "' must be an array of integers");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

void reject_unknown(const toml::table& t, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [k, _] : t) {
    if (!known.count(std::string(k.str()))) fail(where, "unknown key '" + std::string(k.str()) + "'");
  }
}

DatasetSpec parse_dataset(const toml::table& t, std::size_t index) {
  const std::string where = "datasets[" + std::to_string(index) + "]";
  reject_unknown(t, {"name", "path", "adapter", "domain", "item_fields", "profile_fields", "options"},
                 where);
  DatasetSpec d;
  d.path = get<std::string>(t, "path", "", where);
  if (d.path.empty()) fail(where, "'path' is required");
  d.name = get<std::string>(t, "name", std::filesystem::path(d.path).filename().string(), where);
  d.schema.adapter = get<std::string>(t, "adapter", "canonical", where);
  d.schema.domain_name = get<std::string>(t, "domain", d.name, where);
  d.schema.item_fields = get_strings(t, "item_fields", where);
  d.schema.profile_fields = get_strings(t, "profile_fields", where);
  if (const auto* opts = t.get_as<toml::table>("options")) {
    for (const auto& [k, v] : *opts) {
      std::string value;
      if (auto s = v.value<std::string>()) value = *s;
      else if (auto i = v.value<std::int64_t>()) value = std::to_string(*i);
      else if (auto b = v.value<bool>()) value = *b ? "true" : "false";
      else fail(where, "option '" + std::string(k.str()) + "' must be a string, integer or bool");
      d.schema.options[std::string(k.str())] = value;
    }
  }
  return d;
}

MethodSpec parse_method(const toml::table& t, std::size_t index) {
  const std::string where = "methods[" + std::to_string(index) + "]";
  MethodSpec m;
  m.label = get<std::string>(t, "label", "", where);
  if (m.label.empty()) fail(where, "'label' is required");
  const std::string w = "method '" + m.label + "'";
  const std::string kind = get<std::string>(t, "kind", "", w);
  if (kind == "bm25") {
    reject_unknown(t, {"label", "kind", "k1", "b"}, w);
    m.kind = MethodKind::Bm25;
    m.bm25.k1 = get<double>(t, "k1", m.bm25.k1, w);
    m.bm25.b = get<double>(t, "b", m.bm25.b, w);
  } else if (kind == "random") {
    reject_unknown(t, {"label", "kind"}, w);
    m.kind = MethodKind::Random;
  } else if (kind == "dense") {
    reject_unknown(t, {"label", "kind", "provider", "model", "dimension", "query_prefix",
                       "passage_prefix", "endpoint", "api_key_env", "batch_size", "max_in_flight"},
                   w);
    m.kind = MethodKind::Dense;
    m.provider = get<std::string>(t, "provider", "http", w);
    if (m.provider != "http" && m.provider != "hashed-bow" && m.provider != "store") {
      fail(w, "provider must be http, hashed-bow or store");
    }
    m.embedding.model_name = get<std::string>(t, "model", m.label, w);
    m.embedding.dimension = get<std::size_t>(t, "dimension", 0, w);
    m.embedding.query_prefix = get<std::string>(t, "query_prefix", "", w);
    m.embedding.passage_prefix = get<std::string>(t, "passage_prefix", "", w);
    m.embedding.endpoint = get<std::string>(t, "endpoint", "", w);
    m.api_key_env = get<std::string>(t, "api_key_env", "", w);
    m.batch_size = get<std::size_t>(t, "batch_size", 64, w);
    m.max_in_flight = get<std::size_t>(t, "max_in_flight", 8, w);
    if (m.provider == "http" && m.embedding.endpoint.empty()) fail(w, "http provider needs 'endpoint'");
    if (m.provider == "hashed-bow" && m.embedding.dimension == 0) {
      fail(w, "hashed-bow provider needs 'dimension'");
    }
    if (m.batch_size == 0 || m.batch_size > 64) fail(w, "batch_size must be in 1..64");
  } else if (kind == "setsim") {
    reject_unknown(t, {"label", "kind", "embedding", "llm", "pairing", "similarity", "queries", "reg"},
                   w);
    m.kind = MethodKind::SetSim;
    m.embedding_method = get<std::string>(t, "embedding", "", w);
    m.llm_method = get<std::string>(t, "llm", "", w);
    m.pairing = get<std::string>(t, "pairing", "Raw-Raw", w);
    m.similarity = get<std::string>(t, "similarity", "maxsum", w);
    m.queries = get<int>(t, "queries", 10, w);
    m.reg = get<double>(t, "reg", 1e-4, w);
    try {
      setsim::pairing_from_string(m.pairing);
      setsim::similarity_from_string(m.similarity);
    } catch (const ConfigError& e) {
      fail(w, e.what());
    }
    if (m.queries < 1) fail(w, "queries must be >= 1");
    if (!(m.reg > 0)) fail(w, "reg must be positive");
  } else if (kind == "llm") {
    reject_unknown(t, {"label", "kind", "provider", "model", "endpoint", "api_key_env", "temperature",
                       "max_concurrent", "requests_per_second", "max_attempts", "timeout_s", "top_k",
                       "retries", "response"},
                   w);
    m.kind = MethodKind::Llm;
    m.provider = get<std::string>(t, "provider", "http", w);
    if (m.provider != "http" && m.provider != "fixed" && m.provider != "cache") {
      fail(w, "provider must be http, fixed or cache");
    }
    m.chat.model = get<std::string>(t, "model", m.label, w);
    m.chat.endpoint = get<std::string>(t, "endpoint", "", w);
    m.api_key_env = get<std::string>(t, "api_key_env", "", w);
    m.chat.temperature = get<double>(t, "temperature", 0.0, w);
    m.chat.max_concurrent = get<int>(t, "max_concurrent", 4, w);
    m.chat.requests_per_second = get<double>(t, "requests_per_second", 0.0, w);
    m.chat.retry.max_attempts = get<int>(t, "max_attempts", 5, w);
    m.chat.retry.timeout = std::chrono::seconds(get<int>(t, "timeout_s", 120, w));
    m.top_k = get<int>(t, "top_k", 10, w);
    m.retries = get<int>(t, "retries", 2, w);
    m.fixed_response = get<std::string>(t, "response", "", w);
    if (m.provider == "http" && m.chat.endpoint.empty()) fail(w, "http provider needs 'endpoint'");
    if (m.provider == "fixed" && !t.get("response")) fail(w, "fixed provider needs 'response'");
    if (m.chat.max_concurrent < 1 || m.chat.max_concurrent > 64) {
      fail(w, "max_concurrent must be in 1..64");
    }
    if (m.top_k < 1) fail(w, "top_k must be >= 1");
    if (m.retries < 0) fail(w, "retries must be >= 0");
  } else {
    fail(w, "kind must be bm25, dense, setsim, llm or random");
  }
  return m;
}

ScenarioSpec parse_scenario(const toml::table& t) {
  const std::string where = "scenario";
  reject_unknown(t, {"mode", "m", "L", "pairs"}, where);
  ScenarioSpec s;
  const std::string mode = get<std::string>(t, "mode", "narrow", where);
  if (mode == "narrow") s.kind = ScenarioKind::Narrow;
  else if (mode == "broad") s.kind = ScenarioKind::Broad;
  else if (mode == "sweep") s.kind = ScenarioKind::Sweep;
  else if (mode == "cross") s.kind = ScenarioKind::Cross;
  else fail(where, "mode must be narrow, broad, sweep or cross");
  s.m = get_ints(t, "m", {s.kind == ScenarioKind::Narrow ? 0 : 1}, where);
  s.L = get_ints(t, "L", {}, where);
  if (const auto* pairs = t.get_as<toml::array>("pairs")) {
    for (const auto& el : *pairs) {
      const auto* pt = el.as_table();
      if (!pt) fail(where, "pairs must be tables {source, target}");
      s.pairs.push_back({get<std::string>(*pt, "source", "", where),
                         get<std::string>(*pt, "target", "", where)});
    }
  }
  return s;
}

}  // namespace

ExperimentConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  reject_unknown(root, {"seed", "n_users", "candidates", "k", "baseline", "alpha", "fixed_user_panel",
                        "cache_dir", "scenario", "datasets", "methods"},
                 "config");
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.seed = static_cast<std::uint64_t>(get<std::int64_t>(root, "seed", 0, "config"));
  c.n_users = get<int>(root, "n_users", 500, "config");
  c.k = get<std::size_t>(root, "k", 10, "config");
  c.baseline = get<std::string>(root, "baseline", "", "config");
  c.alpha = get<double>(root, "alpha", 1e-4, "config");
  c.fixed_user_panel = get<bool>(root, "fixed_user_panel", true, "config");
  c.cache_dir = get<std::string>(root, "cache_dir", "", "config");
  const int candidates = get<int>(root, "candidates", 50, "config");

  if (const auto* sc = root.get_as<toml::table>("scenario")) {
    c.scenario = parse_scenario(*sc);
  } else {
    c.scenario.L.clear();
  }
  if (c.scenario.L.empty()) c.scenario.L = {candidates};

  if (const auto* arr = root.get_as<toml::array>("datasets")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto* t = (*arr)[i].as_table();
      if (!t) fail("datasets", "entries must be tables");
      c.datasets.push_back(parse_dataset(*t, i));
    }
  }
  if (const auto* arr = root.get_as<toml::array>("methods")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto* t = (*arr)[i].as_table();
      if (!t) fail("methods", "entries must be tables");
      c.methods.push_back(parse_method(*t, i));
    }
  }
  if (c.baseline.empty() && !c.methods.empty()) c.baseline = c.methods.front().label;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

void validate(const ExperimentConfig& c) {
  if (c.datasets.empty()) throw ConfigError("config: at least one [[datasets]] entry is required");
  if (c.methods.empty()) throw ConfigError("config: at least one [[methods]] entry is required");
  if (c.n_users < 1) throw ConfigError("config: n_users must be >= 1");
  if (c.k < 1) throw ConfigError("config: k must be >= 1");
  if (!(c.alpha > 0 && c.alpha < 0.5)) throw ConfigError("config: alpha must be in (0, 0.5)");

  std::set<std::string> names, labels;
  for (const auto& d : c.datasets) {
    if (!names.insert(d.name).second) throw ConfigError("config: duplicate dataset name '" + d.name + "'");
  }
  for (const auto& m : c.methods) {
    if (!labels.insert(m.label).second) throw ConfigError("config: duplicate method label '" + m.label + "'");
  }
  if (!labels.count(c.baseline)) throw ConfigError("config: baseline '" + c.baseline + "' is not a method");

  for (const auto& m : c.methods) {
    if (m.kind != MethodKind::SetSim) continue;
    const auto& e = c.method(m.embedding_method.empty() ? "<missing>" : m.embedding_method);
    if (e.kind != MethodKind::Dense) {
      throw ConfigError("method '" + m.label + "': embedding must name a dense method");
    }
    const auto pairing = setsim::pairing_from_string(m.pairing);
    if (pairing.user != setsim::Representation::Raw || pairing.item != setsim::Representation::Raw) {
      if (m.llm_method.empty()) throw ConfigError("method '" + m.label + "': pairing needs 'llm'");
      if (c.method(m.llm_method).kind != MethodKind::Llm) {
        throw ConfigError("method '" + m.label + "': llm must name an llm method");
      }
    }
  }

  const auto& s = c.scenario;
  if (s.m.empty()) throw ConfigError("scenario: m must not be empty");
  for (int L : s.L) {
    if (L < 4) throw ConfigError("scenario: L must be >= 4");
    if (c.k > static_cast<std::size_t>(L)) throw ConfigError("config: k exceeds L=" + std::to_string(L));
  }
  for (int m : s.m) {
    if (m < 0) throw ConfigError("scenario: m must be >= 0");
    if (s.kind == ScenarioKind::Narrow && m != 0) throw ConfigError("scenario: narrow implies m = 0");
    if ((s.kind == ScenarioKind::Broad || s.kind == ScenarioKind::Cross) && m < 1) {
      throw ConfigError("scenario: " + to_string(s.kind) + " needs m >= 1");
    }
  }
  if (s.kind == ScenarioKind::Cross) {
    if (s.pairs.empty()) throw ConfigError("scenario: cross needs pairs = [{source, target}]");
    for (const auto& p : s.pairs) {
      c.dataset(p.source);
      c.dataset(p.target);
      if (p.source == p.target) throw ConfigError("scenario: cross pair needs two different datasets");
    }
  } else if (!s.pairs.empty()) {
    throw ConfigError("scenario: pairs only apply to cross mode");
  }
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  using json = nlohmann::ordered_json;
  json j;
  j["seed"] = c.seed;
  j["n_users"] = c.n_users;
  j["k"] = c.k;
  j["baseline"] = c.baseline;
  j["alpha"] = c.alpha;
  j["fixed_user_panel"] = c.fixed_user_panel;
  j["scenario"] = {{"mode", to_string(c.scenario.kind)}, {"m", c.scenario.m}, {"L", c.scenario.L}};
  if (!c.scenario.pairs.empty()) {
    json pairs = json::array();
    for (const auto& p : c.scenario.pairs) pairs.push_back({{"source", p.source}, {"target", p.target}});
    j["scenario"]["pairs"] = pairs;
  }
  json datasets = json::array();
  for (const auto& d : c.datasets) {
    json options = json::object();
    for (const auto& [k, v] : d.schema.options) options[k] = v;
    datasets.push_back({{"name", d.name},
                        {"path", d.path},
                        {"adapter", d.schema.adapter},
                        {"domain", d.schema.domain_name},
                        {"item_fields", d.schema.item_fields},
                        {"profile_fields", d.schema.profile_fields},
                        {"options", options}});
  }
  j["datasets"] = datasets;
  json methods = json::array();
  for (const auto& m : c.methods) {
    json mj = {{"label", m.label}, {"kind", to_string(m.kind)}};
    switch (m.kind) {
      case MethodKind::Bm25:
        mj["k1"] = m.bm25.k1;
        mj["b"] = m.bm25.b;
        break;
      case MethodKind::Dense:
        mj["provider"] = m.provider;
        mj["model"] = m.embedding.model_name;
        mj["dimension"] = m.embedding.dimension;
        mj["query_prefix"] = m.embedding.query_prefix;
        mj["passage_prefix"] = m.embedding.passage_prefix;
        break;
      case MethodKind::SetSim:
        mj["embedding"] = m.embedding_method;
        mj["llm"] = m.llm_method;
        mj["pairing"] = m.pairing;
        mj["similarity"] = m.similarity;
        mj["queries"] = m.queries;
        mj["reg"] = m.reg;
        break;
      case MethodKind::Llm:
        mj["provider"] = m.provider;
        mj["model"] = m.chat.model;
        mj["temperature"] = m.chat.temperature;
        mj["top_k"] = m.top_k;
        mj["retries"] = m.retries;
        if (m.provider == "fixed") mj["response"] = m.fixed_response;
        break;
      case MethodKind::Random:
        break;
    }
    methods.push_back(mj);
  }
  j["methods"] = methods;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  return sha256_hex(config_to_json(config).dump()).substr(0, 16);
}

}  // namespace coldbench::experiment
