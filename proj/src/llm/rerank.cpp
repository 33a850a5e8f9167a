#include "coldbench/llm/rerank.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_set>

#include "coldbench/util/rng.hpp"

namespace coldbench::llm {

std::string to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::Clean: return "clean";
    case ParseStatus::Repaired: return "repaired";
    case ParseStatus::Fallback: return "fallback";
  }
  return "?";
}

std::string to_string(Repair repair) {
  switch (repair) {
    case Repair::OutOfRange: return "out_of_range";
    case Repair::Duplicate: return "duplicate";
    case Repair::Truncated: return "truncated";
    case Repair::Partial: return "partial";
  }
  return "?";
}

static const char* kInstruction =
    "You must solve the following recommendation task. The task is to select {K} items from the "
    "candidate set that the user might like and arrange them in order of preference. Output the "
    "result as a list consisting of {K} item IDs, like [8, 4, ...]. ";

static std::string numbered(const std::vector<std::string>& texts) {
  std::string out = "{";
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(i + 1) + ": " + texts[i];
  }
  return out + "}";
}

RerankRequest build_rerank_prompt(const bench::Task& task, const corpus::ItemCatalog& catalog,
                                  std::uint64_t seed, int top_k) {
  RerankRequest req;
  req.user_id = task.user_id;
  req.seed = seed;
  req.top_k = std::clamp(top_k, 1, static_cast<int>(std::max<std::size_t>(1, task.candidate_ids.size())));
  req.permutation = task.candidate_ids;
  Rng rng(derive_seed(seed, "shuffle"));
  rng.shuffle(req.permutation);

  std::string head = kInstruction;
  const std::string k = std::to_string(req.top_k);
  for (auto pos = head.find("{K}"); pos != std::string::npos; pos = head.find("{K}", pos)) {
    head.replace(pos, 3, k);
  }

  std::string user_info;
  if (const auto* profile = std::get_if<bench::ProfileEvidence>(&task.evidence)) {
    user_info = "I am giving you the profile of the target user.\n# User Information: " +
                profile->text;
  } else {
    const auto& history = std::get<bench::HistoryEvidence>(task.evidence);
    user_info =
        "I am giving you the items that the target user has interacted with in the past.\n"
        "# User Item History (Chronological order, 1 is the oldest):\n" +
        numbered(history.texts);
  }

  std::vector<std::string> texts;
  texts.reserve(req.permutation.size());
  for (const auto& id : req.permutation) texts.push_back(catalog.text(id));
  req.prompt = head + user_info + "\n# Candidate items: " + numbered(texts);
  return req;
}

// First "[...]" whose contents are integers separated by commas/whitespace.
static std::optional<std::vector<long long>> first_int_list(std::string_view raw) {
  for (std::size_t open = raw.find('['); open != std::string_view::npos;
       open = raw.find('[', open + 1)) {
    const auto close = raw.find(']', open + 1);
    if (close == std::string_view::npos) return std::nullopt;
    std::string_view body = raw.substr(open + 1, close - open - 1);
    std::vector<long long> values;
    bool ok = true;
    std::size_t i = 0;
    while (i < body.size() && ok) {
      const char c = body[i];
      if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
        ++i;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 ((c == '-' || c == '+') && i + 1 < body.size() &&
                  std::isdigit(static_cast<unsigned char>(body[i + 1])))) {
        std::size_t j = i + 1;
        while (j < body.size() && std::isdigit(static_cast<unsigned char>(body[j]))) ++j;
        const std::string digits(body.substr(i, j - i));
        long long v = 0;
        try {
          v = std::stoll(digits);
        } catch (const std::out_of_range&) {
          v = std::numeric_limits<long long>::max();
        }
        values.push_back(v);
        i = j;
      } else {
        ok = false;
      }
    }
    if (ok && !values.empty()) return values;
  }
  return std::nullopt;
}

ParsedList parse_rerank_output(std::string_view raw, int L, int K) {
  ParsedList out;
  const auto list = first_int_list(raw);
  if (!list) return out;

  std::vector<int> in_range;
  for (long long v : *list) {
    if (v >= 1 && v <= L) in_range.push_back(static_cast<int>(v));
  }
  if (in_range.size() != list->size()) out.repairs.push_back(Repair::OutOfRange);

  std::unordered_set<int> seen;
  for (int v : in_range) {
    if (seen.insert(v).second) out.positions.push_back(v);
  }
  if (out.positions.size() != in_range.size()) out.repairs.push_back(Repair::Duplicate);

  const auto k = static_cast<std::size_t>(std::max(1, std::min(K, L)));
  if (out.positions.size() > k) {
    out.positions.resize(k);
    out.repairs.push_back(Repair::Truncated);
  }
  if (out.positions.empty()) {
    out.status = ParseStatus::Fallback;
    return out;
  }
  if (out.positions.size() < k) out.repairs.push_back(Repair::Partial);
  out.status = out.repairs.empty() ? ParseStatus::Clean : ParseStatus::Repaired;
  return out;
}

RerankOutcome rerank_with_llm(LlmClient& client, const bench::Task& task,
                              const corpus::ItemCatalog& catalog, std::uint64_t seed, int retries,
                              int top_k, const std::string& method) {
  RerankOutcome outcome;
  outcome.ranking.user_id = task.user_id;
  outcome.ranking.method = method;
  outcome.ranking.seed = seed;
  const int L = static_cast<int>(task.candidate_ids.size());

  RerankRequest req;
  for (int attempt = 0; attempt <= std::max(0, retries); ++attempt) {
    const std::uint64_t s =
        attempt == 0 ? seed : derive_seed(seed, "retry/" + std::to_string(attempt));
    req = build_rerank_prompt(task, catalog, s, top_k);
    outcome.raw_response = client.complete(req.prompt);
    outcome.attempts = attempt + 1;
    auto parsed = parse_rerank_output(outcome.raw_response, L, req.top_k);
    if (parsed.status == ParseStatus::Fallback) continue;

    outcome.status = parsed.status;
    outcome.repairs = parsed.repairs;
    std::vector<bool> used(req.permutation.size(), false);
    for (int p : parsed.positions) {
      used[static_cast<std::size_t>(p - 1)] = true;
      outcome.ranking.item_ids.push_back(req.permutation[static_cast<std::size_t>(p - 1)]);
    }
    for (std::size_t i = 0; i < req.permutation.size(); ++i) {
      if (!used[i]) outcome.ranking.item_ids.push_back(req.permutation[i]);
    }
    return outcome;
  }
  outcome.status = ParseStatus::Fallback;
  outcome.repairs.clear();
  outcome.ranking.item_ids = req.permutation;
  return outcome;
}

}  // namespace coldbench::llm
