#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace pssl::config {

// Minimal TOML-style reader: [section] headers, key = value pairs, '#'
// comments, values are integers, floats, booleans, quoted strings, or
// (possibly nested) arrays. Unknown keys are rejected by the consumer.
struct Value {
  std::variant<std::int64_t, double, bool, std::string, std::vector<Value>> data;

  bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }
  std::int64_t as_int(const std::string& key) const;
  double as_double(const std::string& key) const;
  bool as_bool(const std::string& key) const;
  const std::string& as_string(const std::string& key) const;
  const std::vector<Value>& as_array(const std::string& key) const;
};

// Keys are flattened to "section.key" (or bare "key" before any section).
using Table = std::map<std::string, Value>;

Table parse_toml(const std::string& text);
Table parse_toml_file(const std::string& path);

// Tracks which keys a consumer touched so leftovers can be rejected.
class KeyTracker {
 public:
  explicit KeyTracker(const Table& table) : table_(table) {}
  bool has(const std::string& key) const { return table_.count(key) != 0; }
  const Value& get(const std::string& key);
  // Throws std::invalid_argument listing any untouched keys.
  void reject_unknown() const;

 private:
  const Table& table_;
  std::map<std::string, bool> used_;
};

}  // namespace pssl::config
