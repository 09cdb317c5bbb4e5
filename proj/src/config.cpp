#include "pssl/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pssl::config {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + msg);
}

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

Value parse_value(const std::string& text, std::size_t& pos, std::size_t line);

Value parse_array(const std::string& text, std::size_t& pos, std::size_t line) {
  ++pos;  // consume '['
  std::vector<Value> items;
  while (true) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) fail(line, "unterminated array");
    if (text[pos] == ']') {
      ++pos;
      break;
    }
    items.push_back(parse_value(text, pos, line));
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size() && text[pos] == ',') {
      ++pos;
    } else if (pos < text.size() && text[pos] == ']') {
      ++pos;
      break;
    } else {
      fail(line, "expected ',' or ']' in array");
    }
  }
  return Value{std::move(items)};
}

Value parse_scalar(const std::string& token, std::size_t line) {
  if (token.empty()) fail(line, "empty value");
  if (token == "true") return Value{true};
  if (token == "false") return Value{false};
  try {
    std::size_t consumed = 0;
    if (token.find_first_of(".eE") == std::string::npos) {
      const std::int64_t i = std::stoll(token, &consumed);
      if (consumed == token.size()) return Value{i};
    } else {
      const double d = std::stod(token, &consumed);
      if (consumed == token.size() && std::isfinite(d)) return Value{d};
    }
  } catch (const std::exception&) {
  }
  fail(line, "cannot parse value '" + token + "'");
}

Value parse_value(const std::string& text, std::size_t& pos, std::size_t line) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos >= text.size()) fail(line, "missing value");
  if (text[pos] == '[') return parse_array(text, pos, line);
  if (text[pos] == '"') {
    const std::size_t end = text.find('"', pos + 1);
    if (end == std::string::npos) fail(line, "unterminated string");
    Value v{text.substr(pos + 1, end - pos - 1)};
    pos = end + 1;
    return v;
  }
  std::size_t end = pos;
  while (end < text.size() && text[end] != ',' && text[end] != ']' &&
         !std::isspace(static_cast<unsigned char>(text[end])))
    ++end;
  Value v = parse_scalar(text.substr(pos, end - pos), line);
  pos = end;
  return v;
}

}  // namespace

std::int64_t Value::as_int(const std::string& key) const {
  if (const auto* i = std::get_if<std::int64_t>(&data)) return *i;
  throw std::invalid_argument("config key '" + key + "' must be an integer");
}

double Value::as_double(const std::string& key) const {
  if (const auto* d = std::get_if<double>(&data)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&data)) return static_cast<double>(*i);
  throw std::invalid_argument("config key '" + key + "' must be a number");
}

bool Value::as_bool(const std::string& key) const {
  if (const auto* b = std::get_if<bool>(&data)) return *b;
  throw std::invalid_argument("config key '" + key + "' must be a boolean");
}

const std::string& Value::as_string(const std::string& key) const {
  if (const auto* s = std::get_if<std::string>(&data)) return *s;
  throw std::invalid_argument("config key '" + key + "' must be a string");
}

const std::vector<Value>& Value::as_array(const std::string& key) const {
  if (const auto* a = std::get_if<std::vector<Value>>(&data)) return *a;
  throw std::invalid_argument("config key '" + key + "' must be an array");
}

Table parse_toml(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty()) fail(lineno, "empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = strip(line.substr(0, eq));
    if (key.empty()) fail(lineno, "empty key");
    for (char c : key)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
        fail(lineno, "invalid key '" + key + "'");
    std::string value_text = strip(line.substr(eq + 1));
    std::size_t pos = 0;
    Value v = parse_value(value_text, pos, lineno);
    while (pos < value_text.size() && std::isspace(static_cast<unsigned char>(value_text[pos])))
      ++pos;
    if (pos != value_text.size()) fail(lineno, "trailing characters after value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) fail(lineno, "duplicate key '" + full + "'");
    table.emplace(full, std::move(v));
  }
  return table;
}

Table parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

const Value& KeyTracker::get(const std::string& key) {
  auto it = table_.find(key);
  if (it == table_.end()) throw std::invalid_argument("missing config key '" + key + "'");
  used_[key] = true;
  return it->second;
}

void KeyTracker::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : table_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty())
    throw std::invalid_argument("unknown config keys: " + unknown);
}

}  // namespace pssl::config
