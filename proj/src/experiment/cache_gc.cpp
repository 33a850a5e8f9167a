#include <algorithm>
#include <fstream>
#include <set>

#include "coldbench/experiment/pipeline.hpp"

namespace fs = std::filesystem;

namespace coldbench::experiment {

namespace {

std::uintmax_t entry_size(const fs::path& p) {
  std::error_code ec;
  if (fs::is_regular_file(p, ec)) return fs::file_size(p, ec);
  std::uintmax_t total = 0;
  for (auto it = fs::recursive_directory_iterator(p, ec); !ec && it != fs::end(it); it.increment(ec)) {
    if (it->is_regular_file(ec)) total += it->file_size(ec);
  }
  return total;
}

fs::file_time_type entry_mtime(const fs::path& p) {
  std::error_code ec;
  auto latest = fs::last_write_time(p, ec);
  if (fs::is_directory(p, ec)) {
    for (auto it = fs::recursive_directory_iterator(p, ec); !ec && it != fs::end(it); it.increment(ec)) {
      latest = std::max(latest, it->last_write_time(ec));
    }
  }
  return latest;
}

std::set<std::string> pinned_refs(const fs::path& runs_root) {
  std::set<std::string> refs;
  std::error_code ec;
  if (runs_root.empty() || !fs::is_directory(runs_root, ec)) return refs;
  for (const auto& run : fs::directory_iterator(runs_root, ec)) {
    if (!run.is_directory() || !fs::exists(run.path() / kPinFile)) continue;
    std::ifstream in(run.path() / "cache_refs.txt");
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) refs.insert(line);
    }
  }
  return refs;
}

}  // namespace

GcReport cache_gc(const fs::path& cache_dir, const fs::path& runs_root, const RetentionPolicy& policy) {
  GcReport report;
  std::error_code ec;
  if (!fs::is_directory(cache_dir, ec)) return report;
  const auto keep = pinned_refs(runs_root);

  struct Entry {
    fs::path path;
    fs::file_time_type mtime;
    std::uintmax_t bytes;
  };
  std::vector<Entry> entries;
  std::uintmax_t total = 0;
  for (const auto& e : fs::directory_iterator(cache_dir, ec)) {
    Entry entry{e.path(), entry_mtime(e.path()), entry_size(e.path())};
    total += entry.bytes;
    if (!keep.count(e.path().filename().string())) entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.mtime != b.mtime ? a.mtime < b.mtime : a.path < b.path;
  });

  const auto now = fs::file_time_type::clock::now();
  for (const auto& e : entries) {
    const bool stale = policy.max_age.count() > 0 && now - e.mtime > policy.max_age;
    const bool over = policy.max_bytes > 0 && total > policy.max_bytes;
    if (!stale && !over) continue;
    fs::remove_all(e.path, ec);
    if (ec) continue;
    report.freed_bytes += e.bytes;
    total -= e.bytes;
    report.removed.push_back(e.path);
  }
  return report;
}

}  // namespace coldbench::experiment
