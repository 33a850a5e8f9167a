#include "coldbench/corpus/dataset.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "coldbench/corpus/adapters.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"

namespace coldbench::corpus {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string join_limited(const std::vector<std::string>& ids, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > limit) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

ojson fields_to_json(const FieldMap& fields) {
  ojson obj = ojson::object();
  for (const auto& [k, v] : fields) obj[k] = v;
  return obj;
}

// Non-string JSON values (numbers, nested objects) are kept as their compact
// JSON text.
std::optional<FieldMap> json_to_fields(const ojson& obj) {
  if (!obj.is_object()) return std::nullopt;
  FieldMap out;
  for (const auto& [k, v] : obj.items()) {
    if (v.is_null()) continue;
    out.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

}  // namespace

const std::string* find_field(const FieldMap& fields, std::string_view name) {
  for (const auto& [k, v] : fields) {
    if (k == name) return &v;
  }
  return nullptr;
}

Dataset Dataset::create(std::string domain_name, std::vector<Item> items,
                        std::vector<UserRecord> users, LoadReport report) {
  Dataset ds;
  ds.domain_name_ = std::move(domain_name);
  ds.report_ = std::move(report);

  std::vector<std::string> duplicates;
  std::vector<std::string> empty_items;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!ds.item_index_.emplace(items[i].item_id, i).second) {
      duplicates.push_back(items[i].item_id);
    }
    bool any_text = std::any_of(items[i].fields.begin(), items[i].fields.end(),
                                [](const auto& kv) { return !kv.second.empty(); });
    if (!any_text) empty_items.push_back(items[i].item_id);
  }
  if (!duplicates.empty()) {
    throw DataError("duplicate item_id: " + join_limited(duplicates));
  }
  if (!empty_items.empty()) {
    throw DataError("items without any non-empty text field: " + join_limited(empty_items));
  }

  std::vector<std::string> dup_users;
  std::set<std::string> unknown;
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (!ds.user_index_.emplace(users[u].user_id, u).second) {
      dup_users.push_back(users[u].user_id);
    }
    for (const auto& it : users[u].interactions) {
      if (!ds.item_index_.count(it.item_id)) unknown.insert(it.item_id);
    }
    std::stable_sort(users[u].interactions.begin(), users[u].interactions.end(),
                     [](const Interaction& a, const Interaction& b) { return a.ts < b.ts; });
  }
  if (!dup_users.empty()) throw DataError("duplicate user_id: " + join_limited(dup_users));
  if (!unknown.empty()) {
    throw DataError("interactions reference unknown item_id: " +
                    join_limited({unknown.begin(), unknown.end()}));
  }

  ds.items_ = std::move(items);
  ds.users_ = std::move(users);
  auto files = to_canonical_jsonl(ds);
  ds.fingerprint_ = sha256_hex(ds.domain_name_ + '\0' + files.items + '\0' + files.users +
                               '\0' + files.interactions);
  return ds;
}

const Item* Dataset::find_item(std::string_view item_id) const {
  auto it = item_index_.find(std::string(item_id));
  return it == item_index_.end() ? nullptr : &items_[it->second];
}

const UserRecord* Dataset::find_user(std::string_view user_id) const {
  auto it = user_index_.find(std::string(user_id));
  return it == user_index_.end() ? nullptr : &users_[it->second];
}

CanonicalFiles to_canonical_jsonl(const Dataset& dataset) {
  CanonicalFiles out;
  for (const auto& item : dataset.items()) {
    ojson row = {{"item_id", item.item_id}, {"fields", fields_to_json(item.fields)}};
    out.items += row.dump() + "\n";
  }
  for (const auto& user : dataset.users()) {
    ojson row = {{"user_id", user.user_id}, {"profile", fields_to_json(user.profile)}};
    out.users += row.dump() + "\n";
    for (const auto& it : user.interactions) {
      ojson irow = {{"user_id", user.user_id}, {"item_id", it.item_id}, {"ts", it.ts}};
      out.interactions += irow.dump() + "\n";
    }
  }
  return out;
}

void export_dataset(const Dataset& dataset, const fs::path& dir) {
  auto files = to_canonical_jsonl(dataset);
  write_file_atomic(dir / "items.jsonl", files.items);
  write_file_atomic(dir / "users.jsonl", files.users);
  write_file_atomic(dir / "interactions.jsonl", files.interactions);
}

void apply_field_schema(std::vector<Item>& items, std::vector<UserRecord>& users,
                        const DatasetSchema& schema) {
  auto select = [](FieldMap& fields, const std::vector<std::string>& order) {
    FieldMap kept;
    for (const auto& name : order) {
      if (const auto* v = find_field(fields, name)) kept.emplace_back(name, *v);
    }
    fields = std::move(kept);
  };
  if (!schema.item_fields.empty()) {
    for (const auto& name : schema.item_fields) {
      bool seen = std::any_of(items.begin(), items.end(),
                              [&](const Item& i) { return find_field(i.fields, name); });
      if (!seen) throw DataError("schema item field '" + name + "' missing from every item");
    }
    for (auto& item : items) select(item.fields, schema.item_fields);
  }
  if (!schema.profile_fields.empty()) {
    for (const auto& name : schema.profile_fields) {
      bool seen = std::any_of(users.begin(), users.end(), [&](const UserRecord& u) {
        return find_field(u.profile, name);
      });
      if (!seen) {
        throw DataError("schema profile field '" + name + "' missing from every user");
      }
    }
    for (auto& user : users) select(user.profile, schema.profile_fields);
  }
}

Dataset load_canonical(const fs::path& dir, const std::string& domain_name,
                       const DatasetSchema& schema) {
  if (!fs::is_directory(dir)) throw DataError("not a dataset directory: " + dir.string());
  LoadReport report;
  auto malformed = [&](const fs::path& file, std::size_t line, const std::string& why) {
    ++report.malformed_rows;
    if (report.messages.size() < 50) {
      report.messages.push_back(file.filename().string() + ":" + std::to_string(line) +
                                ": " + why);
    }
  };

  std::vector<Item> items;
  const fs::path items_path = dir / "items.jsonl";
  for_each_line(items_path, [&](std::string_view line, std::size_t no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    ojson row = ojson::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("item_id") ||
        !row["item_id"].is_string()) {
      malformed(items_path, no, "missing or invalid item_id");
      return;
    }
    auto fields = json_to_fields(row.value("fields", ojson::object()));
    if (!fields) {
      malformed(items_path, no, "fields is not an object");
      return;
    }
    items.push_back({row["item_id"].get<std::string>(), std::move(*fields)});
  });

  std::vector<UserRecord> users;
  std::unordered_map<std::string, std::size_t> user_pos;
  const fs::path users_path = dir / "users.jsonl";
  if (fs::exists(users_path)) {
    for_each_line(users_path, [&](std::string_view line, std::size_t no) {
      if (line.find_first_not_of(" \t") == std::string_view::npos) return;
      ojson row = ojson::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object() || !row.contains("user_id") ||
          !row["user_id"].is_string()) {
        malformed(users_path, no, "missing or invalid user_id");
        return;
      }
      auto profile = json_to_fields(row.value("profile", ojson::object()));
      if (!profile) {
        malformed(users_path, no, "profile is not an object");
        return;
      }
      std::string id = row["user_id"].get<std::string>();
      user_pos.emplace(id, users.size());
      users.push_back({std::move(id), std::move(*profile), {}});
    });
  }

  // Rows without "ts" get their line number: datasets with only ordinal
  // order still need a total order per user.
  const fs::path inter_path = dir / "interactions.jsonl";
  std::size_t with_ts = 0, without_ts = 0;
  for_each_line(inter_path, [&](std::string_view line, std::size_t no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    ojson row = ojson::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("user_id") ||
        !row.contains("item_id") || !row["user_id"].is_string() ||
        !row["item_id"].is_string()) {
      malformed(inter_path, no, "missing user_id or item_id");
      return;
    }
    std::int64_t ts = static_cast<std::int64_t>(no);
    if (row.contains("ts")) {
      if (!row["ts"].is_number_integer()) {
        malformed(inter_path, no, "ts is not an integer");
        return;
      }
      ts = row["ts"].get<std::int64_t>();
      ++with_ts;
    } else {
      ++without_ts;
    }
    std::string uid = row["user_id"].get<std::string>();
    auto [pos, inserted] = user_pos.emplace(uid, users.size());
    if (inserted) users.push_back({uid, {}, {}});
    users[pos->second].interactions.push_back({row["item_id"].get<std::string>(), ts});
  });
  if (with_ts && without_ts) {
    throw DataError(inter_path.string() +
                    ": mixes rows with and without \"ts\"; synthetic timestamps need all "
                    "rows to omit it");
  }

  apply_field_schema(items, users, schema);
  return Dataset::create(domain_name, std::move(items), std::move(users), std::move(report));
}

Dataset load_dataset(const fs::path& path, const DatasetSchema& schema) {
  if (!fs::exists(path)) throw DataError("unreadable path: " + path.string());
  std::string domain = schema.domain_name;
  if (domain.empty()) {
    domain = fs::is_directory(path) ? fs::absolute(path).lexically_normal().filename().string()
                                    : path.stem().string();
    if (domain.empty()) domain = fs::absolute(path).parent_path().filename().string();
  }
  const std::string& adapter = schema.adapter;
  if (adapter.empty() || adapter == "canonical") return load_canonical(path, domain, schema);
  if (adapter == "movielens") return load_movielens(path, domain, schema);
  if (adapter == "job") return load_job(path, domain, schema);
  if (adapter == "amazon") return load_amazon(path, domain, schema);
  throw ConfigError("unknown dataset adapter: " + adapter);
}

}  // namespace coldbench::corpus
