#include "coldbench/setsim/setsim.hpp"

#include <algorithm>
#include <cctype>

#include "coldbench/util/error.hpp"

namespace coldbench::setsim {

std::string to_string(Side side) { return side == Side::User ? "user" : "item"; }

std::string to_string(Representation rep) {
  switch (rep) {
    case Representation::Raw: return "Raw";
    case Representation::CQ: return "CQ";
    case Representation::MQ: return "MQ";
  }
  return "?";
}

std::string to_string(Similarity sim) { return sim == Similarity::MaxSum ? "maxsum" : "emd"; }

static std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Similarity similarity_from_string(const std::string& text) {
  const auto t = lower(text);
  if (t == "maxsum" || t == "max-sum" || t == "max_sum") return Similarity::MaxSum;
  if (t == "emd") return Similarity::EMD;
  throw ConfigError("unknown set similarity '" + text + "'");
}

static Representation rep_from_string(const std::string& text) {
  const auto t = lower(text);
  if (t == "raw") return Representation::Raw;
  if (t == "cq") return Representation::CQ;
  if (t == "mq") return Representation::MQ;
  throw ConfigError("unknown representation '" + text + "'");
}

Pairing pairing_from_string(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) throw ConfigError("pairing must look like 'CQ-Raw': " + text);
  Pairing p{rep_from_string(text.substr(0, dash)), rep_from_string(text.substr(dash + 1))};
  const bool allowed = (p.user == Representation::Raw && p.item == Representation::Raw) ||
                       (p.user == Representation::CQ && p.item == Representation::CQ) ||
                       (p.user == Representation::CQ && p.item == Representation::Raw) ||
                       (p.user == Representation::MQ && p.item == Representation::Raw) ||
                       (p.user == Representation::MQ && p.item == Representation::MQ);
  if (!allowed) throw ConfigError("unsupported pairing " + text);
  return p;
}

std::string to_string(const Pairing& pairing) {
  return to_string(pairing.user) + "-" + to_string(pairing.item);
}

VectorSet build_representation(Representation mode, const std::string& raw_text,
                               const QuerySet* queries, dense::Embedder& embedder,
                               dense::Role role) {
  VectorSet set;
  set.provenance = mode;
  if (mode == Representation::Raw) {
    set.vectors.push_back(embedder.embed_one(raw_text, role));
    return set;
  }
  if (!queries || queries->queries.empty()) {
    throw ConfigError(to_string(mode) + " representation needs a query set");
  }
  if (mode == Representation::CQ) {
    std::string joined;
    for (std::size_t i = 0; i < queries->queries.size(); ++i) {
      if (i) joined += '\n';
      joined += queries->queries[i];
    }
    set.vectors.push_back(embedder.embed_one(joined, role));
  } else {
    set.vectors = embedder.embed_texts(queries->queries, role);
  }
  return set;
}

static void require_nonempty(const VectorSet& u, const VectorSet& v) {
  if (u.vectors.empty() || v.vectors.empty()) throw DataError("set similarity of an empty set");
}

double max_sum_similarity(const VectorSet& user, const VectorSet& item) {
  require_nonempty(user, item);
  double total = 0;
  for (const auto& u : user.vectors) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : item.vectors) best = std::max(best, dense::cosine(u, v));
    total += best;
  }
  return total;
}

CostMatrix cosine_cost(const VectorSet& user, const VectorSet& item) {
  CostMatrix c(user.size(), item.size());
  for (std::size_t i = 0; i < user.size(); ++i)
    for (std::size_t j = 0; j < item.size(); ++j)
      c(i, j) = 1.0 - dense::cosine(user.vectors[i], item.vectors[j]);
  return c;
}

double emd_similarity(const VectorSet& user, const VectorSet& item, const EmdOptions& options) {
  require_nonempty(user, item);
  const std::size_t n = user.size(), m = item.size();
  if (n == 1 && m == 1) return dense::cosine(user.vectors[0], item.vectors[0]);

  const CostMatrix cost = cosine_cost(user, item);
  double w = 0;
  if (n == 1 || m == 1) {
    // all mass of the singleton side moves to (or from) every vector of the other side
    for (double c : cost.values) w += c;
    w /= static_cast<double>(std::max(n, m));
  } else if (n == m && n <= options.exact_assignment_max) {
    w = solve_assignment(cost).total_cost / static_cast<double>(n);
  } else {
    std::vector<double> a(n, 1.0 / static_cast<double>(n));
    std::vector<double> b(m, 1.0 / static_cast<double>(m));
    w = sinkhorn(cost, a, b, options.sinkhorn).cost;
  }
  return 1.0 - w;
}

eval::Ranking rank_setsim(const bench::Task& task, const Pairing& pairing, Similarity sim,
                          const corpus::ItemCatalog& catalog, dense::Embedder& embedder,
                          const QuerySource& queries, const std::string& method,
                          const EmdOptions& emd) {
  auto expand = [&](const std::string& text, Side side) {
    if (!queries.llm) throw ConfigError("pairing " + to_string(pairing) + " needs an LLM client");
    return expand_queries(*queries.llm, text, side, queries.domain_name, queries.k, queries.seed,
                          queries.cache);
  };

  std::vector<VectorSet> user_sets;
  for (const auto& text : bench::evidence_texts(task)) {
    std::optional<QuerySet> qs;
    if (pairing.user != Representation::Raw) qs = expand(text, Side::User);
    user_sets.push_back(build_representation(pairing.user, text, qs ? &*qs : nullptr, embedder,
                                             dense::Role::Query));
  }
  if (user_sets.empty()) throw DataError("task " + task.user_id + " has no evidence");

  std::vector<double> scores;
  scores.reserve(task.candidate_ids.size());
  for (const auto& id : task.candidate_ids) {
    const auto& text = catalog.text(id);
    std::optional<QuerySet> qs;
    if (pairing.item != Representation::Raw) qs = expand(text, Side::Item);
    const VectorSet item = build_representation(pairing.item, text, qs ? &*qs : nullptr, embedder,
                                                dense::Role::Passage);
    double total = 0;
    for (const auto& u : user_sets) {
      total += sim == Similarity::MaxSum ? max_sum_similarity(u, item) : emd_similarity(u, item, emd);
    }
    scores.push_back(total / static_cast<double>(user_sets.size()));
  }
  return {task.user_id, eval::order_by_score(task.candidate_ids, scores), method, task.seed};
}

}  // namespace coldbench::setsim
