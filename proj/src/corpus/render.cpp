#include "coldbench/corpus/render.hpp"

#include "coldbench/util/error.hpp"

namespace coldbench::corpus {

std::string python_str_repr(std::string_view text) {
  const bool has_single = text.find('\'') != std::string_view::npos;
  const bool has_double = text.find('"') != std::string_view::npos;
  const char quote = (has_single && !has_double) ? '"' : '\'';

  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(text.size() + 2);
  out.push_back(quote);
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (ch == quote || ch == '\\') {
      out.push_back('\\');
      out.push_back(ch);
    } else if (ch == '\n') {
      out += "\\n";
    } else if (ch == '\r') {
      out += "\\r";
    } else if (ch == '\t') {
      out += "\\t";
    } else if (c < 0x20 || c == 0x7f) {
      out += "\\x";
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    } else {
      out.push_back(ch);  // UTF-8 passes through, as repr() keeps printable code points
    }
  }
  out.push_back(quote);
  return out;
}

std::string render_fields(const FieldMap& fields) {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : fields) {
    if (!first) out += ", ";
    first = false;
    out += python_str_repr(k);
    out += ": ";
    out += python_str_repr(v);
  }
  out += "}";
  return out;
}

std::string render_item_text(const Item& item, const std::vector<std::string>& field_order) {
  if (field_order.empty()) return render_fields(item.fields);
  FieldMap ordered;
  for (const auto& name : field_order) {
    if (const auto* v = find_field(item.fields, name)) ordered.emplace_back(name, *v);
  }
  return render_fields(ordered);
}

std::string render_profile_text(const UserRecord& user) {
  if (user.profile.empty()) {
    throw DataError("user " + user.user_id + " has no profile fields");
  }
  return render_fields(user.profile);
}

ItemCatalog::ItemCatalog(const Dataset& dataset, const std::vector<std::string>& field_order) {
  texts_.reserve(dataset.items().size());
  for (const auto& item : dataset.items()) {
    texts_.emplace(item.item_id, render_item_text(item, field_order));
  }
}

const std::string& ItemCatalog::text(const std::string& item_id) const {
  auto it = texts_.find(item_id);
  if (it == texts_.end()) throw DataError("unknown item_id: " + item_id);
  return it->second;
}

}  // namespace coldbench::corpus
