#include <algorithm>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "coldbench/setsim/setsim.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::setsim {

std::string expansion_prompt(const std::string& subject_text, Side side,
                             const std::string& domain_name, int k) {
  std::string prompt = "I am planning to make a recommender system, so please enrich the following ";
  if (side == Side::User) {
    prompt += "user's information.\n# User profile\n";
  } else {
    prompt += "item's information.\n# Item information\n";
  }
  prompt += subject_text;
  prompt += "\n# Task\nThe items to recommend are in the " + domain_name + " domain.\n";
  prompt += "Please generate " + std::to_string(k) + " distinct and comprehensive search queries.";
  return prompt;
}

std::vector<std::string> parse_quoted_queries(std::string_view response) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::size_t i = 0;
  while (i < response.size()) {
    if (response[i] != '"') {
      ++i;
      continue;
    }
    std::string cur;
    std::size_t j = i + 1;
    bool closed = false;
    for (; j < response.size(); ++j) {
      if (response[j] == '\\' && j + 1 < response.size()) {
        cur.push_back(response[++j]);
      } else if (response[j] == '"') {
        closed = true;
        break;
      } else {
        cur.push_back(response[j]);
      }
    }
    if (!closed) break;
    auto first = cur.find_first_not_of(" \t\r\n");
    auto last = cur.find_last_not_of(" \t\r\n");
    if (first != std::string::npos) {
      std::string q = cur.substr(first, last - first + 1);
      if (seen.insert(q).second) out.push_back(std::move(q));
    }
    i = j + 1;
  }
  return out;
}

QuerySetCache::QuerySetCache(const std::filesystem::path& file) {
  if (std::filesystem::exists(file)) {
    for_each_line(file, [&](std::string_view line, std::size_t) {
      if (line.empty()) return;
      auto row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded()) return;
      const Side side = row.value("side", "user") == "item" ? Side::Item : Side::User;
      entries_.emplace(key(row.value("text_hash", ""), side, row.value("model", ""),
                           row.value("K", 0)),
                       row.value("queries", std::vector<std::string>{}));
    });
  } else if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  out_.open(file, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open query cache " + file.string());
}

std::string QuerySetCache::key(const std::string& text_hash, Side side, const std::string& model,
                               int k) {
  return text_hash + "|" + to_string(side) + "|" + model + "|" + std::to_string(k);
}

std::optional<std::vector<std::string>> QuerySetCache::get(const std::string& text_hash, Side side,
                                                           const std::string& model, int k) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key(text_hash, side, model, k));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void QuerySetCache::put(const std::string& text_hash, Side side, const std::string& model, int k,
                        const std::vector<std::string>& queries) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(key(text_hash, side, model, k), queries).second) return;
  if (out_.is_open()) {
    nlohmann::json row = {{"text_hash", text_hash}, {"side", to_string(side)},
                          {"model", model},         {"K", k},
                          {"queries", queries}};
    out_ << row.dump() << '\n';
    out_.flush();
  }
}

QuerySet expand_queries(llm::LlmClient& llm, const std::string& subject_text, Side side,
                        const std::string& domain_name, int k, std::uint64_t seed,
                        QuerySetCache* cache) {
  (void)seed;  // temperature-0 prompts are deterministic; the seed only names the request
  if (k < 1) throw ConfigError("query expansion needs K >= 1");
  QuerySet qs;
  qs.model = llm.model();
  qs.source_text_hash = sha256_hex(domain_name + '\0' + subject_text);
  const std::string prompt = expansion_prompt(subject_text, side, domain_name, k);
  qs.prompt_hash = sha256_hex(prompt);

  if (cache) {
    if (auto hit = cache->get(qs.source_text_hash, side, qs.model, k)) {
      qs.queries = std::move(*hit);
      return qs;
    }
  }

  qs.queries = parse_quoted_queries(llm.complete(prompt));
  if (qs.queries.size() < static_cast<std::size_t>(k)) {
    const std::string retry_prompt = prompt + "\nOutput exactly " + std::to_string(k) +
                                     " queries, each enclosed in double quotes.";
    for (auto& q : parse_quoted_queries(llm.complete(retry_prompt))) {
      if (qs.queries.size() >= static_cast<std::size_t>(k)) break;
      if (std::find(qs.queries.begin(), qs.queries.end(), q) == qs.queries.end()) {
        qs.queries.push_back(std::move(q));
      }
    }
  }
  if (qs.queries.empty()) {
    throw ProviderError("query expansion: no quoted queries in the model's answers");
  }
  if (qs.queries.size() < static_cast<std::size_t>(k)) {
    qs.warnings.push_back("padded " + std::to_string(k - static_cast<int>(qs.queries.size())) +
                          " missing queries by repeating the last one");
    while (qs.queries.size() < static_cast<std::size_t>(k)) qs.queries.push_back(qs.queries.back());
  }
  qs.queries.resize(static_cast<std::size_t>(k));
  if (cache) cache->put(qs.source_text_hash, side, qs.model, k, qs.queries);
  return qs;
}

}  // namespace coldbench::setsim
