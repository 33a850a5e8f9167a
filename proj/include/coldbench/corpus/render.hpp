#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coldbench/corpus/dataset.hpp"

namespace coldbench::corpus {

/// Python repr() of a str: single quotes unless the text contains a single
/// quote and no double quote.
std::string python_str_repr(std::string_view text);

/// Renders fields as a Python dict literal: {'k1': 'v1', 'k2': 'v2'}.
std::string render_fields(const FieldMap& fields);

/// Renders the listed fields in the given order; fields the item lacks are
/// skipped. An empty field_order renders every field in stored order.
std::string render_item_text(const Item& item,
                             const std::vector<std::string>& field_order = {});

/// Throws DataError if the user has no profile fields.
std::string render_profile_text(const UserRecord& user);

/// Rendered item texts keyed by item id for one dataset.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(const Dataset& dataset,
                       const std::vector<std::string>& field_order = {});

  /// Throws DataError for unknown ids.
  const std::string& text(const std::string& item_id) const;
  bool contains(const std::string& item_id) const { return texts_.count(item_id) != 0; }
  const std::unordered_map<std::string, std::string>& texts() const { return texts_; }

 private:
  std::unordered_map<std::string, std::string> texts_;
};

}  // namespace coldbench::corpus
