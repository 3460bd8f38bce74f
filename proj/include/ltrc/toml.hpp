#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ltrc/common.hpp"

namespace ltrc {

// Minimal TOML subset: [table] and [[array-of-tables]] headers, bare keys,
// string/number/boolean scalars, single-line arrays, # comments.
struct toml_value {
  enum class kind { string, number, boolean, array };
  kind k = kind::string;
  std::string str;
  double num = 0.0;
  bool flag = false;
  std::vector<toml_value> items;
};

struct toml_table {
  std::map<std::string, toml_value> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  const toml_value& get(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) throw schema_error("missing key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key) const {
    const auto& v = get(key);
    if (v.k != toml_value::kind::string)
      throw schema_error("key '" + key + "' must be a string");
    return v.str;
  }
  double get_number(const std::string& key) const {
    const auto& v = get(key);
    if (v.k != toml_value::kind::number)
      throw schema_error("key '" + key + "' must be a number");
    return v.num;
  }
  double get_number_or(const std::string& key, double fallback) const {
    return has(key) ? get_number(key) : fallback;
  }
  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }
  std::vector<std::string> get_string_array(const std::string& key) const {
    const auto& v = get(key);
    if (v.k != toml_value::kind::array)
      throw schema_error("key '" + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& item : v.items) {
      if (item.k != toml_value::kind::string)
        throw schema_error("array '" + key + "' must contain strings");
      out.push_back(item.str);
    }
    return out;
  }
};

struct toml_document {
  toml_table root;
  std::map<std::string, toml_table> tables;
  std::map<std::string, std::vector<toml_table>> arrays;
};

namespace detail {

inline std::string toml_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

inline toml_value parse_toml_scalar(const std::string& raw, int line_no);

inline toml_value parse_toml_string(const std::string& raw, int line_no) {
  toml_value v;
  v.k = toml_value::kind::string;
  std::size_t i = 1;
  for (; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '\\') {
      if (i + 1 >= raw.size())
        throw parse_error("line " + std::to_string(line_no) + ": dangling escape");
      const char esc = raw[++i];
      switch (esc) {
        case '"': v.str += '"'; break;
        case '\\': v.str += '\\'; break;
        case 'n': v.str += '\n'; break;
        case 't': v.str += '\t'; break;
        default:
          throw parse_error("line " + std::to_string(line_no) +
                            ": unsupported escape \\" + std::string(1, esc));
      }
    } else if (c == '"') {
      if (toml_trim(raw.substr(i + 1)).empty()) return v;
      throw parse_error("line " + std::to_string(line_no) +
                        ": trailing characters after string");
    } else {
      v.str += c;
    }
  }
  throw parse_error("line " + std::to_string(line_no) + ": unterminated string");
}

inline toml_value parse_toml_array(const std::string& raw, int line_no) {
  if (raw.back() != ']')
    throw parse_error("line " + std::to_string(line_no) + ": unterminated array");
  toml_value v;
  v.k = toml_value::kind::array;
  const std::string body = raw.substr(1, raw.size() - 2);
  std::string current;
  bool in_string = false;
  auto flush = [&]() {
    const std::string item = toml_trim(current);
    if (!item.empty()) v.items.push_back(parse_toml_scalar(item, line_no));
    current.clear();
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      flush();
      continue;
    }
    current += c;
  }
  flush();
  return v;
}

inline toml_value parse_toml_scalar(const std::string& raw, int line_no) {
  if (raw.empty())
    throw parse_error("line " + std::to_string(line_no) + ": empty value");
  if (raw.front() == '"') return parse_toml_string(raw, line_no);
  if (raw.front() == '[') return parse_toml_array(raw, line_no);
  toml_value v;
  if (raw == "true" || raw == "false") {
    v.k = toml_value::kind::boolean;
    v.flag = raw == "true";
    return v;
  }
  v.k = toml_value::kind::number;
  const char* begin = raw.data();
  const char* end = begin + raw.size();
  auto [ptr, ec] = std::from_chars(begin, end, v.num);
  if (ec != std::errc{} || ptr != end)
    throw parse_error("line " + std::to_string(line_no) + ": bad value '" + raw + "'");
  return v;
}

inline bool valid_toml_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

}  // namespace detail

inline toml_document parse_toml(const std::string& text) {
  toml_document doc;
  toml_table* current = &doc.root;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = detail::toml_trim(detail::strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_array = line.size() > 1 && line[1] == '[';
      const std::string close = is_array ? "]]" : "]";
      if (line.size() < 2 * close.size() + 1 ||
          line.substr(line.size() - close.size()) != close)
        throw parse_error("line " + std::to_string(line_no) + ": malformed header");
      const std::string name = detail::toml_trim(
          line.substr(close.size(), line.size() - 2 * close.size()));
      if (!detail::valid_toml_key(name))
        throw parse_error("line " + std::to_string(line_no) + ": bad table name '" +
                          name + "'");
      if (is_array) {
        doc.arrays[name].emplace_back();
        current = &doc.arrays[name].back();
      } else {
        if (doc.tables.count(name))
          throw parse_error("line " + std::to_string(line_no) + ": duplicate table [" +
                            name + "]");
        current = &doc.tables[name];
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw parse_error("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::toml_trim(line.substr(0, eq));
    if (!detail::valid_toml_key(key))
      throw parse_error("line " + std::to_string(line_no) + ": bad key '" + key + "'");
    if (current->entries.count(key))
      throw parse_error("line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "'");
    current->entries[key] =
        detail::parse_toml_scalar(detail::toml_trim(line.substr(eq + 1)), line_no);
  }
  return doc;
}

}  // namespace ltrc
