#include "coldbench/corpus/adapters.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_map>
#include <unordered_set>

#include "coldbench/corpus/render.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"

namespace coldbench::corpus {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string latin1_to_utf8(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char ch : in) {
    auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string option(const DatasetSchema& schema, const std::string& key,
                   const std::string& fallback = {}) {
  auto it = schema.options.find(key);
  return it == schema.options.end() ? fallback : it->second;
}

class Counter {
 public:
  explicit Counter(LoadReport& report) : report_(report) {}
  void bad(const std::string& where, const std::string& why) {
    ++report_.malformed_rows;
    if (report_.messages.size() < 50) report_.messages.push_back(where + ": " + why);
  }

 private:
  LoadReport& report_;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

fs::path first_existing(const fs::path& dir, std::initializer_list<std::string> names) {
  for (const auto& n : names) {
    if (fs::exists(dir / n)) return dir / n;
  }
  throw DataError("none of the expected files found in " + dir.string());
}

}  // namespace

bool parse_datetime_utc(std::string_view text, std::int64_t& epoch_seconds) {
  text = trim(text);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
      !parse_number(text.substr(8, 2), d)) {
    return false;
  }
  if (text.size() >= 19) {
    if (!parse_number(text.substr(11, 2), h) || !parse_number(text.substr(14, 2), mi) ||
        !parse_number(text.substr(17, 2), s)) {
      return false;
    }
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return false;
  // Howard Hinnant's days_from_civil.
  y -= mo <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  const std::int64_t days = static_cast<std::int64_t>(era) * 146097 + doe - 719468;
  epoch_seconds = days * 86400 + h * 3600 + mi * 60 + s;
  return true;
}

// ---------------------------------------------------------------- MovieLens

Dataset load_movielens(const fs::path& dir, const std::string& domain,
                       const DatasetSchema& schema) {
  static const std::map<std::string, std::string> kAge = {
      {"1", "Under 18"}, {"18", "18-24"}, {"25", "25-34"}, {"35", "35-44"},
      {"45", "45-49"},   {"50", "50-55"}, {"56", "56+"}};
  static const std::vector<std::string> kOccupation = {
      "other or not specified", "academic/educator", "artist", "clerical/admin",
      "college/grad student", "customer service", "doctor/health care",
      "executive/managerial", "farmer", "homemaker", "K-12 student", "lawyer",
      "programmer", "retired", "sales/marketing", "scientist", "self-employed",
      "technician/engineer", "tradesman/craftsman", "unemployed", "writer"};

  LoadReport report;
  Counter bad(report);
  double min_rating = 0;
  if (auto v = option(schema, "min_rating"); !v.empty()) min_rating = std::stod(v);

  std::vector<Item> items;
  for_each_line(dir / "movies.dat", [&](std::string_view raw, std::size_t no) {
    if (raw.empty()) return;
    std::string line = latin1_to_utf8(raw);
    auto cols = split(line, "::");
    if (cols.size() != 3) {
      bad.bad("movies.dat:" + std::to_string(no), "expected 3 columns");
      return;
    }
    std::string genres(cols[2]);
    std::replace(genres.begin(), genres.end(), '|', ',');
    std::string joined;
    for (auto g : split(genres, ",")) {
      if (!joined.empty()) joined += ", ";
      joined += g;
    }
    items.push_back({std::string(cols[0]), {{"title", std::string(cols[1])}, {"genres", joined}}});
  });

  std::vector<UserRecord> users;
  std::unordered_map<std::string, std::size_t> user_pos;
  for_each_line(dir / "users.dat", [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    auto cols = split(line, "::");
    int occ = -1;
    if (cols.size() != 5 || !parse_number(cols[3], occ) || occ < 0 ||
        occ >= static_cast<int>(kOccupation.size()) || !kAge.count(std::string(cols[2]))) {
      bad.bad("users.dat:" + std::to_string(no), "unparseable user row");
      return;
    }
    FieldMap profile = {{"gender", cols[1] == "F" ? "female" : "male"},
                        {"age", kAge.at(std::string(cols[2]))},
                        {"occupation", kOccupation[static_cast<std::size_t>(occ)]}};
    user_pos.emplace(std::string(cols[0]), users.size());
    users.push_back({std::string(cols[0]), std::move(profile), {}});
  });

  std::unordered_set<std::string> item_ids;
  for (const auto& it : items) item_ids.insert(it.item_id);
  for_each_line(dir / "ratings.dat", [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    auto cols = split(line, "::");
    double rating = 0;
    std::int64_t ts = 0;
    if (cols.size() != 4 || !parse_number(cols[3], ts)) {
      bad.bad("ratings.dat:" + std::to_string(no), "unparseable rating row");
      return;
    }
    try {
      rating = std::stod(std::string(cols[2]));
    } catch (const std::exception&) {
      bad.bad("ratings.dat:" + std::to_string(no), "bad rating");
      return;
    }
    if (rating < min_rating) return;
    std::string item(cols[1]);
    if (!item_ids.count(item)) {
      bad.bad("ratings.dat:" + std::to_string(no), "unknown movie " + item);
      return;
    }
    auto [pos, inserted] = user_pos.emplace(std::string(cols[0]), users.size());
    if (inserted) users.push_back({std::string(cols[0]), {}, {}});
    users[pos->second].interactions.push_back({std::move(item), ts});
  });

  apply_field_schema(items, users, schema);
  return Dataset::create(domain, std::move(items), std::move(users), std::move(report));
}

// ---------------------------------------------------------------------- Job

namespace {

struct TsvTable {
  std::vector<std::string> header;
  std::unordered_map<std::string, std::size_t> col;

  std::size_t index(const std::string& name) const {
    auto it = col.find(name);
    if (it == col.end()) throw DataError("TSV column missing: " + name);
    return it->second;
  }
};

void read_tsv(const fs::path& path, Counter& bad,
              const std::function<void(const TsvTable&, const std::vector<std::string_view>&,
                                       std::size_t)>& row_fn) {
  TsvTable table;
  for_each_line(path, [&](std::string_view line, std::size_t no) {
    if (no == 1) {
      for (auto h : split(line, "\t")) {
        table.col.emplace(std::string(trim(h)), table.header.size());
        table.header.emplace_back(trim(h));
      }
      return;
    }
    if (line.empty()) return;
    auto cols = split(line, "\t");
    if (cols.size() != table.header.size()) {
      bad.bad(path.filename().string() + ":" + std::to_string(no),
              "expected " + std::to_string(table.header.size()) + " columns, got " +
                  std::to_string(cols.size()));
      return;
    }
    row_fn(table, cols, no);
  });
}

}  // namespace

Dataset load_job(const fs::path& dir, const std::string& domain, const DatasetSchema& schema) {
  const std::string variant = option(schema, "variant", "all");
  if (variant != "all" && variant != "exp" && variant != "no-exp") {
    throw ConfigError("job adapter: variant must be all, exp or no-exp");
  }
  LoadReport report;
  Counter bad(report);

  std::vector<Item> items;
  std::unordered_set<std::string> item_ids;
  std::vector<fs::path> job_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto name = entry.path().filename().string();
    if (name.rfind("jobs", 0) == 0 && (name.ends_with(".tsv") || name.ends_with(".tsv.gz"))) {
      job_files.push_back(entry.path());
    }
  }
  std::sort(job_files.begin(), job_files.end());
  if (job_files.empty()) throw DataError("job adapter: no jobs*.tsv in " + dir.string());
  for (const auto& jf : job_files) {
    read_tsv(jf, bad, [&](const TsvTable& t, const auto& c, std::size_t) {
      std::string id(trim(c[t.index("JobID")]));
      if (!item_ids.insert(id).second) return;  // jobs repeat across windows
      FieldMap fields = {{"title", std::string(trim(c[t.index("Title")]))},
                         {"Description", std::string(trim(c[t.index("Description")]))},
                         {"Requirements", std::string(trim(c[t.index("Requirements")]))}};
      items.push_back({std::move(id), std::move(fields)});
    });
  }

  std::map<std::string, std::map<int, std::string>> history;
  const fs::path hist_path = first_existing(dir, {"user_history.tsv", "user_history.tsv.gz"});
  read_tsv(hist_path, bad, [&](const TsvTable& t, const auto& c, std::size_t no) {
    int seq = 0;
    if (!parse_number(trim(c[t.index("Sequence")]), seq)) {
      bad.bad("user_history:" + std::to_string(no), "bad Sequence");
      return;
    }
    history[std::string(trim(c[t.index("UserID")]))][seq] =
        std::string(trim(c[t.index("JobTitle")]));
  });

  std::vector<UserRecord> users;
  std::unordered_map<std::string, std::size_t> user_pos;
  const fs::path users_path = first_existing(dir, {"users.tsv", "users.tsv.gz"});
  read_tsv(users_path, bad, [&](const TsvTable& t, const auto& c, std::size_t) {
    std::string id(trim(c[t.index("UserID")]));
    auto hist = history.find(id);
    const bool has_history = hist != history.end() && !hist->second.empty();
    if ((variant == "exp" && !has_history) || (variant == "no-exp" && has_history)) return;
    std::string grad(trim(c[t.index("GraduationDate")]));
    FieldMap profile = {
        {"DegreeType", std::string(trim(c[t.index("DegreeType")]))},
        {"Major", std::string(trim(c[t.index("Major")]))},
        {"GraduationYear", grad.size() >= 4 ? grad.substr(0, 4) : grad},
        {"WorkHistoryCount", std::string(trim(c[t.index("WorkHistoryCount")]))},
        {"TotalYearsExperience", std::string(trim(c[t.index("TotalYearsExperience")]))},
        {"CurrentlyEmployed", std::string(trim(c[t.index("CurrentlyEmployed")]))},
        {"ManagedOthers", std::string(trim(c[t.index("ManagedOthers")]))},
        {"ManagedHowMany", std::string(trim(c[t.index("ManagedHowMany")]))}};
    if (has_history) {
      FieldMap jobs;
      for (const auto& [seq, title] : hist->second) jobs.emplace_back(std::to_string(seq), title);
      profile.emplace_back("work history", render_fields(jobs));
    }
    std::erase_if(profile, [](const auto& kv) { return kv.second.empty(); });
    if (user_pos.emplace(id, users.size()).second) {
      users.push_back({std::move(id), std::move(profile), {}});
    }
  });

  const fs::path apps_path = first_existing(dir, {"apps.tsv", "apps.tsv.gz"});
  read_tsv(apps_path, bad, [&](const TsvTable& t, const auto& c, std::size_t no) {
    std::string uid(trim(c[t.index("UserID")]));
    auto pos = user_pos.find(uid);
    if (pos == user_pos.end()) return;  // filtered by variant or absent from users.tsv
    std::string job(trim(c[t.index("JobID")]));
    std::int64_t ts = 0;
    if (!parse_datetime_utc(c[t.index("ApplicationDate")], ts)) {
      bad.bad("apps:" + std::to_string(no), "bad ApplicationDate");
      return;
    }
    if (!item_ids.count(job)) {
      bad.bad("apps:" + std::to_string(no), "unknown JobID " + job);
      return;
    }
    users[pos->second].interactions.push_back({std::move(job), ts});
  });

  apply_field_schema(items, users, schema);
  return Dataset::create(domain, std::move(items), std::move(users), std::move(report));
}

// ------------------------------------------------------------------- Amazon

namespace {

std::string flatten_text(const nlohmann::json& v, const char* sep) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      std::string part = flatten_text(e, sep);
      if (part.empty()) continue;
      if (!out.empty()) out += sep;
      out += part;
    }
    return out;
  }
  if (v.is_null()) return {};
  return v.dump();
}

fs::path locate(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".jsonl", ".jsonl.gz", ".json", ".json.gz"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw DataError("amazon adapter: cannot find " + stem + ".jsonl[.gz] in " + dir.string());
}

}  // namespace

Dataset load_amazon(const fs::path& dir, const std::string& domain,
                    const DatasetSchema& schema) {
  fs::path reviews_path, meta_path;
  if (auto r = option(schema, "reviews"); !r.empty()) reviews_path = r;
  if (auto m = option(schema, "meta"); !m.empty()) meta_path = m;
  const std::string category = option(schema, "category");
  if (reviews_path.empty() || meta_path.empty()) {
    if (category.empty()) {
      throw ConfigError("amazon adapter needs option category=NAME or reviews=/meta= paths");
    }
    if (reviews_path.empty()) reviews_path = locate(dir, category);
    if (meta_path.empty()) meta_path = locate(dir, "meta_" + category);
  }
  double min_rating = 0;
  if (auto v = option(schema, "min_rating"); !v.empty()) min_rating = std::stod(v);

  LoadReport report;
  Counter bad(report);

  std::vector<Item> items;
  std::unordered_set<std::string> item_ids;
  for_each_line(meta_path, [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    auto row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("parent_asin")) {
      bad.bad(meta_path.filename().string() + ":" + std::to_string(no), "unparseable");
      return;
    }
    std::string id = row["parent_asin"].get<std::string>();
    FieldMap fields;
    auto add = [&](const char* name, const char* sep) {
      if (!row.contains(name)) return;
      std::string v = flatten_text(row[name], sep);
      if (!v.empty()) fields.emplace_back(name, std::move(v));
    };
    add("title", " ");
    add("main_category", " ");
    add("categories", ", ");
    add("store", " ");
    add("features", " ");
    add("description", " ");
    if (fields.empty()) {
      bad.bad(meta_path.filename().string() + ":" + std::to_string(no), "no text fields");
      return;
    }
    if (!item_ids.insert(id).second) {
      bad.bad(meta_path.filename().string() + ":" + std::to_string(no), "repeated " + id);
      return;
    }
    items.push_back({std::move(id), std::move(fields)});
  });

  std::vector<UserRecord> users;
  std::unordered_map<std::string, std::size_t> user_pos;
  for_each_line(reviews_path, [&](std::string_view line, std::size_t no) {
    if (line.empty()) return;
    auto row = nlohmann::json::parse(line, nullptr, false);
    const std::string where = reviews_path.filename().string() + ":" + std::to_string(no);
    if (row.is_discarded() || !row.is_object() || !row.contains("user_id") ||
        !row.contains("parent_asin") || !row.contains("timestamp") ||
        !row["timestamp"].is_number()) {
      bad.bad(where, "unparseable review");
      return;
    }
    if (row.value("rating", 5.0) < min_rating) return;
    std::string item = row["parent_asin"].get<std::string>();
    if (!item_ids.count(item)) {
      bad.bad(where, "no metadata for " + item);
      return;
    }
    std::string uid = row["user_id"].get<std::string>();
    auto [pos, inserted] = user_pos.emplace(uid, users.size());
    if (inserted) users.push_back({uid, {}, {}});
    users[pos->second].interactions.push_back(
        {std::move(item), row["timestamp"].get<std::int64_t>() / 1000});
  });

  apply_field_schema(items, users, schema);
  return Dataset::create(domain, std::move(items), std::move(users), std::move(report));
}

}  // namespace coldbench::corpus
