#include "coldbench/sparse/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "coldbench/util/error.hpp"

namespace coldbench::sparse {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Bm25Index Bm25Index::build(const std::unordered_map<std::string, std::string>& doc_texts,
                           Bm25Params params) {
  if (doc_texts.empty()) throw DataError("BM25 index needs at least one document");
  Bm25Index index;
  index.params_ = params;
  std::size_t total = 0;
  for (const auto& [id, text] : doc_texts) {
    Doc doc;
    for (auto& tok : tokenize(text)) {
      ++doc.tf[tok];
      ++doc.length;
    }
    for (const auto& [term, _] : doc.tf) ++index.df_[term];
    total += doc.length;
    index.docs_.emplace(id, std::move(doc));
  }
  index.avgdl_ = static_cast<double>(total) / static_cast<double>(index.docs_.size());
  // An all-empty corpus would make every length ratio undefined.
  if (index.avgdl_ <= 0) throw DataError("BM25 corpus contains no tokens");
  return index;
}

double Bm25Index::idf(const std::string& term) const {
  const double n = static_cast<double>(docs_.size());
  const double df = static_cast<double>(document_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
  auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

std::size_t Bm25Index::doc_length(const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw DataError("BM25: unknown doc id " + doc_id);
  return it->second.length;
}

double Bm25Index::score_terms(const std::vector<std::string>& query_terms,
                              const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw DataError("BM25: unknown doc id " + doc_id);
  const Doc& doc = it->second;
  const double norm = params_.k1 * (1.0 - params_.b +
                                    params_.b * static_cast<double>(doc.length) / avgdl_);
  double total = 0;
  for (const auto& term : query_terms) {
    auto tf_it = doc.tf.find(term);
    if (tf_it == doc.tf.end()) continue;
    const double tf = static_cast<double>(tf_it->second);
    total += idf(term) * tf * (params_.k1 + 1.0) / (tf + norm);
  }
  return total;
}

namespace {

std::vector<std::string> query_terms(std::string_view text, bool presence) {
  auto terms = tokenize(text);
  if (!presence) return terms;
  std::vector<std::string> unique;
  std::unordered_set<std::string> seen;
  for (auto& t : terms) {
    if (seen.insert(t).second) unique.push_back(std::move(t));
  }
  return unique;
}

}  // namespace

double Bm25Index::score(std::string_view query_text, const std::string& doc_id) const {
  return score_terms(query_terms(query_text, params_.query_term_presence), doc_id);
}

std::string user_query_text(const bench::Task& task) {
  std::string out;
  for (const auto& text : bench::evidence_texts(task)) {
    if (!out.empty()) out.push_back(' ');
    out += text;
  }
  return out;
}

eval::Ranking rank_bm25(const Bm25Index& index, const bench::Task& task) {
  const auto terms = query_terms(user_query_text(task), index.params().query_term_presence);
  std::vector<double> scores;
  scores.reserve(task.candidate_ids.size());
  for (const auto& id : task.candidate_ids) scores.push_back(index.score_terms(terms, id));
  return {task.user_id, eval::order_by_score(task.candidate_ids, scores), "bm25", task.seed};
}

}  // namespace coldbench::sparse
