#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coldbench::corpus {

/// Insertion-ordered field map. Field order drives text rendering, so a
/// sorted container would change every prompt and embedding.
using FieldMap = std::vector<std::pair<std::string, std::string>>;

const std::string* find_field(const FieldMap& fields, std::string_view name);

struct Item {
  std::string item_id;
  FieldMap fields;

  bool operator==(const Item&) const = default;
};

struct Interaction {
  std::string item_id;
  std::int64_t ts = 0;  // epoch seconds

  bool operator==(const Interaction&) const = default;
};

struct UserRecord {
  std::string user_id;
  FieldMap profile;
  std::vector<Interaction> interactions;  // ascending ts, ties in input order

  bool operator==(const UserRecord&) const = default;
};

struct LoadReport {
  std::size_t malformed_rows = 0;
  std::vector<std::string> messages;
};

/// Immutable, validated collection of one domain's items and users.
class Dataset {
 public:
  /// Validates and normalizes: item ids unique, every item has a non-empty
  /// field, user ids unique, every interaction resolves, interactions stably
  /// sorted by timestamp. Throws DataError listing offenders.
  static Dataset create(std::string domain_name, std::vector<Item> items,
                        std::vector<UserRecord> users, LoadReport report = {});

  const std::string& domain_name() const { return domain_name_; }
  const std::vector<Item>& items() const { return items_; }
  const std::vector<UserRecord>& users() const { return users_; }
  const LoadReport& load_report() const { return report_; }

  const Item* find_item(std::string_view item_id) const;
  const UserRecord* find_user(std::string_view user_id) const;

  /// SHA-256 of the canonical JSONL serialization.
  const std::string& fingerprint() const { return fingerprint_; }

  bool operator==(const Dataset& other) const {
    return domain_name_ == other.domain_name_ && items_ == other.items_ &&
           users_ == other.users_;
  }

 private:
  Dataset() = default;

  std::string domain_name_;
  std::vector<Item> items_;
  std::vector<UserRecord> users_;
  LoadReport report_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::string fingerprint_;
};

/// Field-mapping configuration consumed by load_dataset.
struct DatasetSchema {
  /// "canonical", "movielens", "job" or "amazon".
  std::string adapter = "canonical";
  /// Overrides the domain name (defaults to the directory or file stem).
  std::string domain_name;
  /// Item fields to keep, in rendering order. Empty keeps all, as loaded.
  std::vector<std::string> item_fields;
  /// Profile fields to keep, in rendering order. Empty keeps all, as loaded.
  std::vector<std::string> profile_fields;
  /// Adapter-specific options (see adapters.hpp).
  std::map<std::string, std::string> options;
};

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema = {});

/// Canonical three-file JSONL interchange.
struct CanonicalFiles {
  std::string items;
  std::string users;
  std::string interactions;
};
CanonicalFiles to_canonical_jsonl(const Dataset& dataset);
void export_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_canonical(const std::filesystem::path& dir, const std::string& domain_name,
                       const DatasetSchema& schema = {});

/// Applies a schema's field selection and ordering. Throws DataError when a
/// requested field never occurs in the data.
void apply_field_schema(std::vector<Item>& items, std::vector<UserRecord>& users,
                        const DatasetSchema& schema);

}  // namespace coldbench::corpus
