#include "coldbench/bench/suite.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "coldbench/corpus/render.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/rng.hpp"

namespace coldbench::bench {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using corpus::Dataset;
using corpus::UserRecord;

namespace {

constexpr std::uint64_t kSeedMask = (std::uint64_t{1} << 53) - 1;

struct Eligible {
  const UserRecord* user;
  std::vector<std::string> recent;  // distinct, most recent first
};

// Uniform draw of k items from the sorted id list minus the (sorted) excluded
// global indices. Equivalent to a Fisher-Yates prefix over the filtered pool,
// without materializing it.
std::vector<std::string> sample_unseen(const std::vector<std::string>& all_ids,
                                       const std::vector<std::size_t>& excluded, std::size_t k,
                                       Rng& rng) {
  const std::size_t pool = all_ids.size() - excluded.size();
  auto to_global = [&](std::size_t p) {
    std::size_t g = p;
    for (std::size_t h : excluded) {
      if (h <= g) ++g;
      else break;
    }
    return g;
  };
  std::unordered_map<std::size_t, std::size_t> swapped;
  auto at = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool - i));
    std::size_t vi = at(i), vj = at(j);
    swapped[i] = vj;
    swapped[j] = vi;
    out.push_back(all_ids[to_global(vj)]);
  }
  return out;
}

std::vector<std::size_t> excluded_indices(const std::vector<std::string>& all_ids,
                                          const std::vector<std::string>& history) {
  std::vector<std::size_t> out;
  out.reserve(history.size());
  for (const auto& id : history) {
    auto it = std::lower_bound(all_ids.begin(), all_ids.end(), id);
    if (it != all_ids.end() && *it == id) {
      out.push_back(static_cast<std::size_t>(it - all_ids.begin()));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> sorted_item_ids(const Dataset& ds) {
  std::vector<std::string> ids;
  ids.reserve(ds.items().size());
  for (const auto& item : ds.items()) ids.push_back(item.item_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string panel_stream(const SuiteConfig& cfg) {
  if (cfg.fixed_user_panel) return "panel";
  return "panel/" + to_string(cfg.mode) + "/m=" + std::to_string(cfg.m) +
         "/L=" + std::to_string(cfg.L);
}

// Orders every user by the panel stream, so the order is independent of
// which users happen to be eligible.
std::vector<std::string> panel_order(std::vector<std::string> user_ids, const SuiteConfig& cfg) {
  std::sort(user_ids.begin(), user_ids.end());
  Rng rng(derive_seed(cfg.seed, panel_stream(cfg)));
  rng.shuffle(user_ids);
  return user_ids;
}

void check_common(const SuiteConfig& cfg) {
  if (cfg.L <= kPositives) throw ConfigError("L must exceed the number of positives (3)");
  if (cfg.n_users < 1) throw ConfigError("n_users must be >= 1");
  if (cfg.m < 0) throw ConfigError("m must be >= 0");
}

struct Drawn {
  std::vector<std::string> candidates;
  std::uint64_t task_seed;
};

Drawn draw_candidates(const std::vector<std::string>& positives,
                      const std::vector<std::string>& negatives_pool_ids,
                      const std::vector<std::size_t>& excluded, const std::string& user_id,
                      const SuiteConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "user/" + user_id));
  auto negatives = sample_unseen(negatives_pool_ids, excluded,
                                 static_cast<std::size_t>(cfg.L - kPositives), rng);
  Drawn d;
  d.candidates = positives;
  d.candidates.insert(d.candidates.end(), negatives.begin(), negatives.end());
  rng.shuffle(d.candidates);
  d.task_seed = derive_seed(cfg.seed, "task/" + user_id) & kSeedMask;
  return d;
}

void finish(BenchmarkSuite& suite) {
  std::sort(suite.tasks.begin(), suite.tasks.end(),
            [](const Task& a, const Task& b) { return a.user_id < b.user_id; });
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Narrow: return "narrow";
    case Mode::Broad: return "broad";
    case Mode::Cross: return "cross";
  }
  return "?";
}

Mode mode_from_string(const std::string& text) {
  if (text == "narrow") return Mode::Narrow;
  if (text == "broad") return Mode::Broad;
  if (text == "cross") return Mode::Cross;
  throw ConfigError("unknown mode: " + text);
}

std::vector<std::string> evidence_texts(const Task& task) {
  if (const auto* p = std::get_if<ProfileEvidence>(&task.evidence)) return {p->text};
  return std::get<HistoryEvidence>(task.evidence).texts;
}

std::vector<std::string> recent_distinct_items(const UserRecord& user) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto it = user.interactions.rbegin(); it != user.interactions.rend(); ++it) {
    if (seen.insert(it->item_id).second) out.push_back(it->item_id);
  }
  return out;
}

BenchmarkSuite build_tasks(const Dataset& dataset, const SuiteConfig& cfg) {
  check_common(cfg);
  if (cfg.mode == Mode::Narrow && cfg.m != 0) throw ConfigError("narrow mode requires m = 0");
  if (cfg.mode == Mode::Broad && cfg.m < 1) throw ConfigError("broad mode requires m >= 1");
  if (cfg.mode == Mode::Cross) throw ConfigError("use build_cross_domain_tasks for cross mode");

  BenchmarkSuite suite;
  suite.config = cfg;
  suite.dataset_fingerprint = dataset.fingerprint();

  const auto all_ids = sorted_item_ids(dataset);
  const corpus::ItemCatalog catalog(dataset, cfg.item_fields);
  const std::size_t need = static_cast<std::size_t>(std::max(cfg.m, cfg.panel_min_history) +
                                                    kPositives);

  std::vector<std::string> user_ids;
  for (const auto& u : dataset.users()) user_ids.push_back(u.user_id);

  std::size_t eligible_count = 0;
  std::vector<std::string> skipped;
  for (const auto& uid : panel_order(std::move(user_ids), cfg)) {
    const UserRecord& user = *dataset.find_user(uid);
    if (cfg.mode == Mode::Narrow && user.profile.empty()) continue;
    auto recent = recent_distinct_items(user);
    if (recent.size() < need) continue;
    ++eligible_count;
    if (suite.tasks.size() >= static_cast<std::size_t>(cfg.n_users)) continue;

    auto excluded = excluded_indices(all_ids, recent);
    if (all_ids.size() - excluded.size() < static_cast<std::size_t>(cfg.L - kPositives)) {
      skipped.push_back(uid);
      continue;
    }
    Task task;
    task.user_id = uid;
    task.mode = cfg.mode;
    task.domain_name = dataset.domain_name();
    task.positive_ids.assign(recent.rbegin() + static_cast<std::ptrdiff_t>(recent.size() - kPositives),
                             recent.rend());
    if (cfg.mode == Mode::Narrow) {
      task.evidence = ProfileEvidence{corpus::render_profile_text(user)};
    } else {
      HistoryEvidence ev;
      for (int j = kPositives + cfg.m - 1; j >= kPositives; --j) {
        ev.item_ids.push_back(recent[static_cast<std::size_t>(j)]);
        ev.texts.push_back(catalog.text(ev.item_ids.back()));
      }
      task.evidence = std::move(ev);
    }
    std::vector<std::string> positives_recent(recent.begin(), recent.begin() + kPositives);
    auto drawn = draw_candidates(positives_recent, all_ids, excluded, uid, cfg);
    task.candidate_ids = std::move(drawn.candidates);
    task.seed = drawn.task_seed;
    suite.tasks.push_back(std::move(task));
  }

  if (!skipped.empty()) {
    suite.warnings.push_back(std::to_string(skipped.size()) +
                             " user(s) skipped: fewer unseen items than L-3 (first: " +
                             skipped.front() + ")");
  }
  if (suite.tasks.size() < static_cast<std::size_t>(cfg.n_users)) {
    suite.warnings.push_back("only " + std::to_string(suite.tasks.size()) + " of " +
                             std::to_string(cfg.n_users) + " requested users are eligible (" +
                             std::to_string(eligible_count) + " with enough history)");
  }
  finish(suite);
  return suite;
}

BenchmarkSuite build_cross_domain_tasks(const Dataset& source, const Dataset& target,
                                        const SuiteConfig& cfg_in) {
  SuiteConfig cfg = cfg_in;
  cfg.mode = Mode::Cross;
  check_common(cfg);
  if (cfg.m < 1) throw ConfigError("cross-domain mode requires m' >= 1");

  std::vector<std::string> shared;
  for (const auto& u : target.users()) {
    if (source.find_user(u.user_id)) shared.push_back(u.user_id);
  }
  if (shared.empty()) {
    throw DataError("no user id shared between " + source.domain_name() + " and " +
                    target.domain_name());
  }

  BenchmarkSuite suite;
  suite.config = cfg;
  suite.dataset_fingerprint = target.fingerprint();
  suite.source_fingerprint = source.fingerprint();

  const auto all_ids = sorted_item_ids(target);
  const corpus::ItemCatalog source_catalog(source, cfg.item_fields);
  const std::size_t need_source =
      static_cast<std::size_t>(std::max(cfg.m, cfg.panel_min_history));

  std::size_t eligible_count = 0;
  std::vector<std::string> skipped;
  for (const auto& uid : panel_order(std::move(shared), cfg)) {
    auto target_recent = recent_distinct_items(*target.find_user(uid));
    auto source_recent = recent_distinct_items(*source.find_user(uid));
    if (target_recent.size() < static_cast<std::size_t>(kPositives) ||
        source_recent.size() < need_source) {
      continue;
    }
    ++eligible_count;
    if (suite.tasks.size() >= static_cast<std::size_t>(cfg.n_users)) continue;

    auto excluded = excluded_indices(all_ids, target_recent);
    if (all_ids.size() - excluded.size() < static_cast<std::size_t>(cfg.L - kPositives)) {
      skipped.push_back(uid);
      continue;
    }
    Task task;
    task.user_id = uid;
    task.mode = Mode::Cross;
    task.domain_name = target.domain_name();
    task.source_domain = source.domain_name();
    task.positive_ids.assign(target_recent.rend() - kPositives, target_recent.rend());
    HistoryEvidence ev;
    for (int j = cfg.m - 1; j >= 0; --j) {
      ev.item_ids.push_back(source_recent[static_cast<std::size_t>(j)]);
      ev.texts.push_back(source_catalog.text(ev.item_ids.back()));
    }
    task.evidence = std::move(ev);
    std::vector<std::string> positives_recent(target_recent.begin(),
                                              target_recent.begin() + kPositives);
    auto drawn = draw_candidates(positives_recent, all_ids, excluded, uid, cfg);
    task.candidate_ids = std::move(drawn.candidates);
    task.seed = drawn.task_seed;
    suite.tasks.push_back(std::move(task));
  }
  if (!skipped.empty()) {
    suite.warnings.push_back(std::to_string(skipped.size()) +
                             " user(s) skipped: fewer unseen target items than L-3");
  }
  if (suite.tasks.size() < static_cast<std::size_t>(cfg.n_users)) {
    suite.warnings.push_back("only " + std::to_string(suite.tasks.size()) + " of " +
                             std::to_string(cfg.n_users) +
                             " requested users are eligible in both domains (" +
                             std::to_string(eligible_count) + " with enough history)");
  }
  finish(suite);
  return suite;
}

// ------------------------------------------------------------ serialization

namespace {

ojson task_to_json(const Task& t) {
  ojson row;
  row["user_id"] = t.user_id;
  row["mode"] = to_string(t.mode);
  row["domain"] = t.domain_name;
  if (t.mode == Mode::Cross) row["source_domain"] = t.source_domain;
  if (const auto* p = std::get_if<ProfileEvidence>(&t.evidence)) {
    row["evidence"] = {{"profile", p->text}};
  } else {
    const auto& h = std::get<HistoryEvidence>(t.evidence);
    row["evidence"] = {{"history", h.texts}, {"history_ids", h.item_ids}};
  }
  row["candidates"] = t.candidate_ids;
  row["positives"] = t.positive_ids;
  row["seed"] = t.seed;
  return row;
}

}  // namespace

Task task_from_json_line(std::string_view line) {
  auto row = ojson::parse(line);
  Task t;
  t.user_id = row.at("user_id").get<std::string>();
  t.mode = mode_from_string(row.at("mode").get<std::string>());
  t.domain_name = row.value("domain", "");
  t.source_domain = row.value("source_domain", "");
  const auto& ev = row.at("evidence");
  if (ev.contains("profile")) {
    t.evidence = ProfileEvidence{ev.at("profile").get<std::string>()};
  } else {
    HistoryEvidence h;
    h.texts = ev.at("history").get<std::vector<std::string>>();
    h.item_ids = ev.value("history_ids", std::vector<std::string>{});
    t.evidence = std::move(h);
  }
  t.candidate_ids = row.at("candidates").get<std::vector<std::string>>();
  t.positive_ids = row.at("positives").get<std::vector<std::string>>();
  t.seed = row.at("seed").get<std::uint64_t>();
  return t;
}

std::string tasks_to_jsonl(const BenchmarkSuite& suite) {
  std::string out;
  for (const auto& t : suite.tasks) out += task_to_json(t).dump() + "\n";
  return out;
}

std::string suite_meta_json(const BenchmarkSuite& suite) {
  const auto& c = suite.config;
  ojson meta;
  meta["mode"] = to_string(c.mode);
  meta["m"] = c.m;
  meta["L"] = c.L;
  meta["n_users"] = c.n_users;
  meta["seed"] = c.seed;
  meta["fixed_user_panel"] = c.fixed_user_panel;
  meta["panel_min_history"] = c.panel_min_history;
  meta["item_fields"] = c.item_fields;
  meta["dataset_fingerprint"] = suite.dataset_fingerprint;
  if (!suite.source_fingerprint.empty()) meta["source_fingerprint"] = suite.source_fingerprint;
  meta["n_tasks"] = suite.tasks.size();
  meta["warnings"] = suite.warnings;
  return meta.dump(2) + "\n";
}

void write_suite(const BenchmarkSuite& suite, const fs::path& dir) {
  write_file_atomic(dir / "tasks.jsonl", tasks_to_jsonl(suite));
  write_file_atomic(dir / "suite.json", suite_meta_json(suite));
}

BenchmarkSuite read_suite(const fs::path& dir) {
  BenchmarkSuite suite;
  auto meta = ojson::parse(read_file(dir / "suite.json"));
  auto& c = suite.config;
  c.mode = mode_from_string(meta.at("mode").get<std::string>());
  c.m = meta.at("m").get<int>();
  c.L = meta.at("L").get<int>();
  c.n_users = meta.at("n_users").get<int>();
  c.seed = meta.at("seed").get<std::uint64_t>();
  c.fixed_user_panel = meta.value("fixed_user_panel", true);
  c.panel_min_history = meta.value("panel_min_history", 0);
  c.item_fields = meta.value("item_fields", std::vector<std::string>{});
  suite.dataset_fingerprint = meta.value("dataset_fingerprint", "");
  suite.source_fingerprint = meta.value("source_fingerprint", "");
  suite.warnings = meta.value("warnings", std::vector<std::string>{});
  for_each_line(dir / "tasks.jsonl", [&](std::string_view line, std::size_t) {
    if (!line.empty()) suite.tasks.push_back(task_from_json_line(line));
  });
  return suite;
}

}  // namespace coldbench::bench
