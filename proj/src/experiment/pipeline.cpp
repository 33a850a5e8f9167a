#include "coldbench/experiment/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "coldbench/bench/validate.hpp"
#include "coldbench/eval/report.hpp"
#include "coldbench/llm/rerank.hpp"
#include "coldbench/setsim/setsim.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"
#include "coldbench/util/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace coldbench::experiment {

namespace {

void log(const RunOptions& opt, const std::string& line) {
  if (opt.log) *opt.log << line << std::endl;
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string slug(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? v : "";
}

// Providers, caches and clients shared by every scenario of a run.
class Resources {
 public:
  Resources(const ExperimentConfig& cfg, const fs::path& cache_dir, bool offline)
      : cfg_(cfg), cache_dir_(cache_dir), offline_(offline) {}

  dense::Embedder& embedder(const std::string& label) {
    std::lock_guard lock(mutex_);
    auto it = embedders_.find(label);
    if (it != embedders_.end()) return *it->second;
    const MethodSpec& m = cfg_.method(label);
    const std::string entry = "emb-" + slug(m.embedding.model_name) + "-" +
                              sha256_hex(m.embedding.model_name).substr(0, 8);
    refs_.insert(entry);
    auto& store = stores_[entry];
    if (!store) store = std::make_unique<dense::EmbeddingStore>(cache_dir_ / entry);

    dense::EmbeddingProvider* provider = nullptr;
    if (m.provider == "hashed-bow") {
      providers_.push_back(std::make_unique<dense::HashedBowProvider>(m.embedding.dimension));
      provider = providers_.back().get();
    } else if (m.provider == "http" && !offline_) {
      RetryPolicy retry;
      auto p = std::make_unique<dense::HttpEmbeddingProvider>(
          m.embedding.endpoint, env_or_empty(m.api_key_env), retry, m.batch_size);
      http_embed_.push_back(p.get());
      providers_.push_back(std::move(p));
      provider = providers_.back().get();
    }
    auto e = std::make_unique<dense::Embedder>(m.embedding, *store, provider, m.max_in_flight);
    return *embedders_.emplace(label, std::move(e)).first->second;
  }

  llm::LlmClient& chat(const std::string& label) {
    std::lock_guard lock(mutex_);
    auto it = chats_.find(label);
    if (it != chats_.end()) return *it->second;
    const MethodSpec& m = cfg_.method(label);
    if (m.provider == "fixed") {
      auto c = std::make_unique<llm::FixedResponseClient>(m.chat.model, m.fixed_response);
      return *chats_.emplace(label, std::move(c)).first->second;
    }
    if (!response_cache_) {
      refs_.insert("llm_cache.jsonl");
      response_cache_ = std::make_unique<llm::ResponseCache>(cache_dir_ / "llm_cache.jsonl");
    }
    llm::LlmClient* inner = nullptr;
    if (m.provider == "http" && !offline_) {
      auto settings = m.chat;
      settings.api_key = env_or_empty(m.api_key_env);
      auto c = std::make_unique<llm::HttpChatClient>(settings);
      http_chat_.push_back(c.get());
      inner = c.get();
      inner_.push_back(std::move(c));
    }
    auto c = std::make_unique<llm::CachedLlmClient>(m.chat.model, *response_cache_, inner);
    return *chats_.emplace(label, std::move(c)).first->second;
  }

  setsim::QuerySetCache& query_cache() {
    std::lock_guard lock(mutex_);
    if (!query_cache_) {
      refs_.insert("queries.jsonl");
      query_cache_ = std::make_unique<setsim::QuerySetCache>(cache_dir_ / "queries.jsonl");
    }
    return *query_cache_;
  }

  const sparse::Bm25Index& bm25(const std::string& label, const std::string& dataset,
                                const corpus::ItemCatalog& catalog) {
    std::lock_guard lock(mutex_);
    auto key = label + "\n" + dataset;
    auto it = bm25_.find(key);
    if (it == bm25_.end()) {
      it = bm25_.emplace(key, sparse::Bm25Index::build(catalog.texts(), cfg_.method(label).bm25)).first;
    }
    return it->second;
  }

  std::size_t network_requests() const {
    std::size_t n = 0;
    for (auto* p : http_embed_) n += p->request_count();
    for (auto* c : http_chat_) n += c->request_count();
    return n;
  }

  const std::set<std::string>& cache_refs() const { return refs_; }

 private:
  const ExperimentConfig& cfg_;
  fs::path cache_dir_;
  bool offline_;
  std::mutex mutex_;
  std::set<std::string> refs_;
  std::map<std::string, std::unique_ptr<dense::EmbeddingStore>> stores_;
  std::vector<std::unique_ptr<dense::EmbeddingProvider>> providers_;
  std::vector<dense::HttpEmbeddingProvider*> http_embed_;
  std::map<std::string, std::unique_ptr<dense::Embedder>> embedders_;
  std::unique_ptr<llm::ResponseCache> response_cache_;
  std::vector<std::unique_ptr<llm::LlmClient>> inner_;
  std::vector<llm::HttpChatClient*> http_chat_;
  std::map<std::string, std::unique_ptr<llm::LlmClient>> chats_;
  std::unique_ptr<setsim::QuerySetCache> query_cache_;
  std::map<std::string, sparse::Bm25Index> bm25_;
};

struct LoadedDataset {
  const DatasetSpec* spec = nullptr;
  std::optional<corpus::Dataset> data;
  corpus::ItemCatalog catalog;
};

// One suite to rank: a dataset, or a source/target pair in cross mode.
struct SuiteJob {
  std::string name;
  const LoadedDataset* target = nullptr;
  const LoadedDataset* source = nullptr;
  bench::BenchmarkSuite suite;
  fs::path dir;
};

struct TaskOutcome {
  std::optional<eval::Ranking> ranking;
  std::string error;
  std::optional<llm::ParseStatus> status;
  std::vector<llm::Repair> repairs;
  int attempts = 0;
};

TaskOutcome rank_task(const MethodSpec& m, const bench::Task& task, const SuiteJob& job,
                      Resources& res) {
  TaskOutcome out;
  const auto& catalog = job.target->catalog;
  switch (m.kind) {
    case MethodKind::Bm25:
      out.ranking = sparse::rank_bm25(res.bm25(m.label, job.target->spec->name, catalog), task);
      out.ranking->method = m.label;
      break;
    case MethodKind::Random: {
      eval::Ranking r{task.user_id, task.candidate_ids, m.label, task.seed};
      Rng rng(derive_seed(task.seed, "random/" + m.label));
      rng.shuffle(r.item_ids);
      out.ranking = std::move(r);
      break;
    }
    case MethodKind::Dense:
      out.ranking = dense::rank_dense(task, catalog, res.embedder(m.label), m.label);
      break;
    case MethodKind::SetSim: {
      setsim::QuerySource qs;
      const auto pairing = setsim::pairing_from_string(m.pairing);
      if (!m.llm_method.empty()) qs.llm = &res.chat(m.llm_method);
      if (pairing.user != setsim::Representation::Raw || pairing.item != setsim::Representation::Raw) {
        qs.cache = &res.query_cache();
      }
      qs.k = m.queries;
      qs.domain_name = task.domain_name;
      qs.seed = task.seed;
      setsim::EmdOptions emd;
      emd.sinkhorn.reg = m.reg;
      out.ranking = setsim::rank_setsim(task, pairing, setsim::similarity_from_string(m.similarity),
                                        catalog, res.embedder(m.embedding_method), qs, m.label, emd);
      break;
    }
    case MethodKind::Llm: {
      // every LLM sees the same per-task display order
      auto o = llm::rerank_with_llm(res.chat(m.label), task, catalog, derive_seed(task.seed, "llm"),
                                    m.retries, m.top_k, m.label);
      out.ranking = std::move(o.ranking);
      out.status = o.status;
      out.repairs = std::move(o.repairs);
      out.attempts = o.attempts;
      break;
    }
  }
  return out;
}

void warm_embeddings(const MethodSpec& m, const SuiteJob& job, Resources& res, int jobs) {
  auto& emb = res.embedder(m.label);
  std::set<std::string> items, queries;
  for (const auto& t : job.suite.tasks) {
    for (const auto& id : t.candidate_ids) items.insert(job.target->catalog.text(id));
    for (auto& q : bench::evidence_texts(t)) queries.insert(std::move(q));
  }
  std::vector<std::string> iv(items.begin(), items.end()), qv(queries.begin(), queries.end());
  const std::size_t chunk = 256;
  const std::size_t n_i = (iv.size() + chunk - 1) / chunk, n_q = (qv.size() + chunk - 1) / chunk;
  parallel_for(n_i + n_q, jobs, [&](std::size_t c) {
    const bool item = c < n_i;
    const auto& v = item ? iv : qv;
    const std::size_t start = (item ? c : c - n_i) * chunk;
    std::vector<std::string> part(v.begin() + static_cast<long>(start),
                                  v.begin() + static_cast<long>(std::min(v.size(), start + chunk)));
    emb.embed_texts(part, item ? dense::Role::Passage : dense::Role::Query);
  });
}

void warm_queries(const MethodSpec& m, const SuiteJob& job, Resources& res, int jobs) {
  const auto pairing = setsim::pairing_from_string(m.pairing);
  if (pairing.user == setsim::Representation::Raw && pairing.item == setsim::Representation::Raw) return;
  auto& client = res.chat(m.llm_method);
  auto& cache = res.query_cache();
  std::vector<std::pair<std::string, setsim::Side>> work;
  std::set<std::string> seen_items;
  const std::string domain = job.suite.tasks.empty() ? "" : job.suite.tasks.front().domain_name;
  for (const auto& t : job.suite.tasks) {
    if (pairing.user != setsim::Representation::Raw)
      for (auto& e : bench::evidence_texts(t)) work.emplace_back(std::move(e), setsim::Side::User);
    if (pairing.item != setsim::Representation::Raw)
      for (const auto& id : t.candidate_ids)
        if (seen_items.insert(id).second) work.emplace_back(job.target->catalog.text(id), setsim::Side::Item);
  }
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    setsim::expand_queries(client, work[i].first, work[i].second, domain, m.queries, 0, &cache);
  });
}

std::string ranking_line(const eval::Ranking& r, const TaskOutcome& o) {
  json row;
  row["user_id"] = r.user_id;
  row["method"] = r.method;
  row["seed"] = r.seed;
  row["ranking"] = r.item_ids;
  if (o.status) {
    row["parse_status"] = llm::to_string(*o.status);
    json reps = json::array();
    for (auto rep : o.repairs) reps.push_back(llm::to_string(rep));
    row["repairs"] = reps;
    row["attempts"] = o.attempts;
  }
  return row.dump() + "\n";
}

void write_reports(const fs::path& dir, const std::vector<eval::RunResult>& results,
                   const std::string& baseline, double alpha, std::size_t k) {
  const auto table = eval::build_report(results, baseline, alpha, k);
  write_file_atomic(dir / "report.csv", eval::report_to_csv(table));
  write_file_atomic(dir / "report.txt", eval::report_to_text(table));
  write_file_atomic(dir / "winloss.csv", eval::winloss_to_csv(results, baseline));
}

}  // namespace

void regenerate_report(const fs::path& scenario_dir, const std::string& baseline, double alpha,
                       std::size_t k) {
  write_reports(scenario_dir, eval::read_results(scenario_dir / "results.jsonl"), baseline, alpha, k);
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  validate(cfg);
  RunSummary summary;
  summary.config_hash = config_hash(cfg);
  summary.run_dir = opt.out_dir / summary.config_hash;
  summary.cache_dir = cfg.cache_dir.empty() ? opt.out_dir / "cache" : cfg.resolve(cfg.cache_dir);
  fs::create_directories(summary.run_dir);
  fs::create_directories(summary.cache_dir);
  write_file_atomic(summary.run_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  log(opt, "run " + summary.run_dir.string());

  // load everything up front so data errors surface before any work
  std::map<std::string, LoadedDataset> datasets;
  std::set<std::string> needed;
  if (cfg.scenario.kind == ScenarioKind::Cross) {
    for (const auto& p : cfg.scenario.pairs) needed.insert({p.source, p.target});
  } else {
    for (const auto& d : cfg.datasets) needed.insert(d.name);
  }
  for (const auto& d : cfg.datasets) {
    if (!needed.count(d.name)) continue;
    LoadedDataset ld;
    ld.spec = &d;
    ld.data = corpus::load_dataset(cfg.resolve(d.path), d.schema);
    ld.catalog = corpus::ItemCatalog(*ld.data, d.schema.item_fields);
    log(opt, "loaded " + d.name + ": " + std::to_string(ld.data->items().size()) + " items, " +
                 std::to_string(ld.data->users().size()) + " users");
    datasets.emplace(d.name, std::move(ld));
  }

  Resources res(cfg, summary.cache_dir, opt.offline);
  const int max_m = *std::max_element(cfg.scenario.m.begin(), cfg.scenario.m.end());

  for (int L : cfg.scenario.L) {
    for (int m : cfg.scenario.m) {
      ScenarioOutput sc;
      sc.m = m;
      sc.L = L;
      sc.id = "m" + std::to_string(m) + "_L" + std::to_string(L);
      sc.dir = summary.run_dir / sc.id;

      std::vector<SuiteJob> jobs;
      auto make_config = [&](const std::string& stream, const DatasetSpec& fields_from) {
        bench::SuiteConfig sc_cfg;
        sc_cfg.mode = cfg.scenario.kind == ScenarioKind::Cross
                          ? bench::Mode::Cross
                          : (m == 0 ? bench::Mode::Narrow : bench::Mode::Broad);
        sc_cfg.m = m;
        sc_cfg.L = L;
        sc_cfg.n_users = cfg.n_users;
        sc_cfg.seed = derive_seed(cfg.seed, "suite/" + stream);
        sc_cfg.fixed_user_panel = cfg.fixed_user_panel;
        sc_cfg.panel_min_history = cfg.fixed_user_panel ? max_m : 0;
        sc_cfg.item_fields = fields_from.schema.item_fields;
        return sc_cfg;
      };
      if (cfg.scenario.kind == ScenarioKind::Cross) {
        for (const auto& p : cfg.scenario.pairs) {
          SuiteJob job;
          job.name = p.source + "->" + p.target;
          job.source = &datasets.at(p.source);
          job.target = &datasets.at(p.target);
          job.suite = bench::build_cross_domain_tasks(*job.source->data, *job.target->data,
                                                      make_config(job.name, *job.source->spec));
          job.dir = sc.dir / slug(p.source + "__to__" + p.target);
          jobs.push_back(std::move(job));
        }
      } else {
        for (const auto& d : cfg.datasets) {
          SuiteJob job;
          job.name = d.name;
          job.target = &datasets.at(d.name);
          job.suite = bench::build_tasks(*job.target->data, make_config(d.name, d));
          job.dir = sc.dir / slug(d.name);
          jobs.push_back(std::move(job));
        }
      }

      for (auto& job : jobs) {
        const auto report = bench::validate_suite(job.suite, *job.target->data,
                                                  job.source ? &*job.source->data : nullptr);
        if (!report.ok()) {
          throw DataError("suite " + sc.id + "/" + job.name + " failed validation: " +
                          report.violations.front().detail);
        }
        bench::write_suite(job.suite, job.dir);
        log(opt, sc.id + "/" + job.name + ": " + std::to_string(job.suite.tasks.size()) + " tasks");
        for (const auto& w : job.suite.warnings) log(opt, "  warning: " + w);
      }
      if (opt.until == Stage::Suites) {
        summary.scenarios.push_back(std::move(sc));
        continue;
      }

      if (opt.until == Stage::Embed || opt.until == Stage::Expand) {
        for (const auto& job : jobs) {
          for (const auto& meth : cfg.methods) {
            if (meth.kind == MethodKind::Dense) warm_embeddings(meth, job, res, opt.jobs);
            if (opt.until == Stage::Expand && meth.kind == MethodKind::SetSim)
              warm_queries(meth, job, res, opt.jobs);
          }
        }
        summary.scenarios.push_back(std::move(sc));
        continue;
      }

      for (const auto& job : jobs) {
        fs::create_directories(job.dir / "rankings");
        const auto& tasks = job.suite.tasks;
        json failures_log = json::array();
        json llm_stats = json::object();
        std::string failures;
        for (const auto& meth : cfg.methods) {
          std::vector<TaskOutcome> outcomes(tasks.size());
          parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
            try {
              outcomes[i] = rank_task(meth, tasks[i], job, res);
            } catch (const std::exception& e) {
              outcomes[i] = TaskOutcome{};
              outcomes[i].error = e.what();
            }
          });

          std::string lines;
          std::vector<eval::Ranking> rankings;
          std::set<std::string> failed;
          std::map<std::string, std::size_t> status_counts, repair_counts;
          for (std::size_t i = 0; i < tasks.size(); ++i) {
            auto& o = outcomes[i];
            if (!o.ranking) {
              failed.insert(tasks[i].user_id);
              json row = {{"method", meth.label}, {"user_id", tasks[i].user_id}, {"error", o.error}};
              failures += row.dump() + "\n";
              ++status_counts["failed"];
              continue;
            }
            lines += ranking_line(*o.ranking, o);
            if (o.status) {
              ++status_counts[llm::to_string(*o.status)];
              for (auto r : o.repairs) ++repair_counts[llm::to_string(r)];
            }
            rankings.push_back(std::move(*o.ranking));
          }
          write_file_atomic(job.dir / "rankings" / (slug(meth.label) + ".jsonl"), lines);
          if (!failed.empty()) {
            summary.failed_tasks += failed.size();
            const auto first = std::find_if(outcomes.begin(), outcomes.end(),
                                            [](const TaskOutcome& o) { return !o.ranking; });
            log(opt, "  " + meth.label + ": " + std::to_string(failed.size()) + " failed tasks on " +
                         job.name + " (first: " + first->error + ")");
          }
          if (meth.kind == MethodKind::Llm) {
            json s = {{"clean", status_counts["clean"]},
                      {"repaired", status_counts["repaired"]},
                      {"fallback", status_counts["fallback"]},
                      {"failed", status_counts["failed"]}};
            json r = json::object();
            for (const auto& [k, v] : repair_counts) r[k] = v;
            s["repairs"] = r;
            llm_stats[meth.label] = s;
          }
          if (opt.until >= Stage::Evaluate) {
            auto run = eval::evaluate_run(job.suite, rankings, cfg.k, meth.label, failed);
            run.dataset = job.name;
            sc.results.push_back(std::move(run));
          }
          log(opt, "  ranked " + job.name + " with " + meth.label);
        }
        write_file_atomic(job.dir / "failures.jsonl", failures);
        if (!llm_stats.empty()) write_file_atomic(job.dir / "llm_stats.json", llm_stats.dump(2) + "\n");
      }

      if (opt.until >= Stage::Evaluate) {
        // method-major order: all datasets of a method together
        std::stable_sort(sc.results.begin(), sc.results.end(), [&](const auto& a, const auto& b) {
          auto pos = [&](const std::string& label) {
            for (std::size_t i = 0; i < cfg.methods.size(); ++i)
              if (cfg.methods[i].label == label) return i;
            return cfg.methods.size();
          };
          return pos(a.method) < pos(b.method);
        });
        eval::write_results(sc.dir / "results.jsonl", sc.results);
      }
      if (opt.until >= Stage::Report) write_reports(sc.dir, sc.results, cfg.baseline, cfg.alpha, cfg.k);
      summary.scenarios.push_back(std::move(sc));
    }
  }

  if (opt.until >= Stage::Report && summary.scenarios.size() > 1) {
    std::string sweep = "m,L,method,dataset,recall,recall_marker,ndcg,ndcg_marker\n";
    for (const auto& sc : summary.scenarios) {
      const auto table = eval::build_report(sc.results, cfg.baseline, cfg.alpha, cfg.k);
      for (const auto& meth : table.methods) {
        for (const auto& col : table.columns()) {
          auto it = table.cells.find({meth, col});
          if (it == table.cells.end()) continue;
          char buf[160];
          std::snprintf(buf, sizeof buf, "%d,%d,", sc.m, sc.L);
          std::string line = buf + meth + "," + col + ",";
          std::snprintf(buf, sizeof buf, "%.6f", it->second.recall);
          line += std::string(buf) + "," + it->second.recall_marker + ",";
          std::snprintf(buf, sizeof buf, "%.6f", it->second.ndcg);
          line += std::string(buf) + "," + it->second.ndcg_marker + "\n";
          sweep += line;
        }
      }
    }
    write_file_atomic(summary.run_dir / "sweep.csv", sweep);
  }

  std::string refs;
  for (const auto& r : res.cache_refs()) refs += r + "\n";
  write_file_atomic(summary.run_dir / "cache_refs.txt", refs);
  summary.network_requests = res.network_requests();
  return summary;
}

}  // namespace coldbench::experiment
