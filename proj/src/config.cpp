#include "dfn/config.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dfn {

const ConfigValue& ConfigMap::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("missing config key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

double ConfigMap::get_number(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw ValidationError("config key '" + key + "' must be a number");
}

double ConfigMap::get_number_or(const std::string& key, double fallback) const {
  return contains(key) ? get_number(key) : fallback;
}

std::string ConfigMap::get_string(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw ValidationError("config key '" + key + "' must be a string");
}

std::string ConfigMap::get_string_or(const std::string& key, const std::string& fallback) const {
  return contains(key) ? get_string(key) : fallback;
}

bool ConfigMap::get_bool_or(const std::string& key, bool fallback) const {
  if (!contains(key)) return fallback;
  const ConfigValue& v = at(key);
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw ValidationError("config key '" + key + "' must be a boolean");
}

std::vector<double> ConfigMap::get_array(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  if (const double* d = std::get_if<double>(&v)) return {*d};
  throw ValidationError("config key '" + key + "' must be an array of numbers");
}

std::vector<double> ConfigMap::get_array_or(const std::string& key, const std::vector<double>& fallback) const {
  return contains(key) ? get_array(key) : fallback;
}

std::vector<std::string> ConfigMap::get_string_array(const std::string& key) const {
  const ConfigValue& v = at(key);
  if (const auto* a = std::get_if<std::vector<std::string>>(&v)) return *a;
  if (const std::string* s = std::get_if<std::string>(&v)) return {*s};
  throw ValidationError("config key '" + key + "' must be an array of strings");
}

std::vector<std::string> ConfigMap::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!consumed_.count(k)) out.push_back(k);
  return out;
}

std::vector<std::string> ConfigMap::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

namespace {

struct TomlCursor {
  const std::string& text;
  size_t pos = 0;
  int line = 1;

  bool eof() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
  char take() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("config parse error at line " + std::to_string(line) + ": " + msg);
  }
};

void skip_ws_inline(TomlCursor& c) {
  while (!c.eof() && (c.peek() == ' ' || c.peek() == '\t')) c.take();
}

void skip_to_eol(TomlCursor& c) {
  while (!c.eof() && c.peek() != '\n') c.take();
}

bool is_bare_key_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
}

std::string parse_bare_key(TomlCursor& c) {
  std::string key;
  while (!c.eof() && is_bare_key_char(c.peek())) key.push_back(c.take());
  if (key.empty()) c.fail("expected a key");
  return key;
}

std::string parse_basic_string(TomlCursor& c) {
  if (c.take() != '"') c.fail("expected '\"'");
  std::string s;
  while (true) {
    if (c.eof()) c.fail("unterminated string");
    char ch = c.take();
    if (ch == '"') break;
    if (ch == '\\') {
      if (c.eof()) c.fail("unterminated escape");
      char e = c.take();
      switch (e) {
        case 'n': s.push_back('\n'); break;
        case 't': s.push_back('\t'); break;
        case '"': s.push_back('"'); break;
        case '\\': s.push_back('\\'); break;
        default: c.fail(std::string("unsupported escape '\\") + e + "'");
      }
    } else {
      s.push_back(ch);
    }
  }
  return s;
}

double parse_number_token(TomlCursor& c) {
  size_t start = c.pos;
  while (!c.eof()) {
    char ch = c.peek();
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' || ch == '.' ||
        ch == 'e' || ch == 'E' || ch == '_') {
      c.take();
    } else {
      break;
    }
  }
  std::string tok = c.text.substr(start, c.pos - start);
  std::erase(tok, '_');
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    c.fail("malformed number '" + tok + "'");
  }
}

ConfigValue parse_value(TomlCursor& c);

void skip_array_filler(TomlCursor& c) {
  while (!c.eof()) {
    skip_ws_inline(c);
    if (!c.eof() && c.peek() == '#') { skip_to_eol(c); continue; }
    if (!c.eof() && c.peek() == '\n') { c.take(); continue; }
    break;
  }
}

ConfigValue parse_array(TomlCursor& c) {
  c.take(); // '['
  std::vector<double> nums;
  std::vector<std::string> strs;
  bool expect_value = true;
  while (true) {
    skip_array_filler(c);
    if (c.eof()) c.fail("unterminated array");
    if (c.peek() == ']') {
      c.take();
      break;
    }
    if (!expect_value) c.fail("expected ',' or ']' in array");
    ConfigValue v = parse_value(c);
    if (const double* d = std::get_if<double>(&v)) nums.push_back(*d);
    else if (const std::string* s = std::get_if<std::string>(&v)) strs.push_back(*s);
    else c.fail("arrays may hold numbers or strings only");
    expect_value = false;
    skip_array_filler(c);
    if (!c.eof() && c.peek() == ',') {
      c.take();
      expect_value = true;
    }
  }
  if (!strs.empty() && !nums.empty()) c.fail("mixed-type arrays are not supported");
  if (!strs.empty()) return strs;
  return nums;
}

ConfigValue parse_value(TomlCursor& c) {
  skip_ws_inline(c);
  if (c.eof()) c.fail("expected a value");
  char ch = c.peek();
  if (ch == '"') return parse_basic_string(c);
  if (ch == '[') return parse_array(c);
  if (c.text.compare(c.pos, 4, "true") == 0) { c.pos += 4; return true; }
  if (c.text.compare(c.pos, 5, "false") == 0) { c.pos += 5; return false; }
  return parse_number_token(c);
}

} // namespace

ConfigMap parse_toml(const std::string& text) {
  ConfigMap map;
  TomlCursor c{text};
  std::string table;
  while (!c.eof()) {
    skip_ws_inline(c);
    if (c.eof()) break;
    char ch = c.peek();
    if (ch == '\n') { c.take(); continue; }
    if (ch == '#') { skip_to_eol(c); continue; }
    if (ch == '[') {
      c.take();
      skip_ws_inline(c);
      table = parse_bare_key(c);
      skip_ws_inline(c);
      if (c.eof() || c.take() != ']') c.fail("expected ']' after table name");
      skip_ws_inline(c);
      if (!c.eof() && c.peek() == '#') skip_to_eol(c);
      continue;
    }
    std::string key = parse_bare_key(c);
    skip_ws_inline(c);
    if (c.eof() || c.take() != '=') c.fail("expected '=' after key '" + key + "'");
    ConfigValue value = parse_value(c);
    skip_ws_inline(c);
    if (!c.eof() && c.peek() == '#') skip_to_eol(c);
    if (!c.eof() && c.peek() != '\n') c.fail("trailing characters after value for key '" + key + "'");
    std::string full = table.empty() ? key : table + "." + key;
    if (map.contains(full)) c.fail("duplicate key '" + full + "'");
    map.set(full, std::move(value));
  }
  return map;
}

namespace {

void flatten_json(const nlohmann::json& j, const std::string& prefix, ConfigMap& map) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
      flatten_json(it.value(), key, map);
    }
    return;
  }
  if (j.is_number()) { map.set(prefix, j.get<double>()); return; }
  if (j.is_boolean()) { map.set(prefix, j.get<bool>()); return; }
  if (j.is_string()) { map.set(prefix, j.get<std::string>()); return; }
  if (j.is_array()) {
    if (!j.empty() && j.front().is_string()) {
      map.set(prefix, j.get<std::vector<std::string>>());
    } else {
      std::vector<double> nums;
      for (const auto& e : j) {
        if (!e.is_number()) throw ValidationError("config array '" + prefix + "' must be numeric");
        nums.push_back(e.get<double>());
      }
      map.set(prefix, nums);
    }
    return;
  }
  throw ValidationError("unsupported JSON value at '" + prefix + "'");
}

} // namespace

ConfigMap parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config root must be a JSON object");
  ConfigMap map;
  flatten_json(j, "", map);
  return map;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return parse_json(text);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".toml") == 0) return parse_toml(text);
  throw ValidationError("config file '" + path + "' must end in .toml or .json");
}

void apply_overrides(ConfigMap& map, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, text] : overrides) {
    TomlCursor c{text};
    ConfigValue v = parse_value(c);
    map.set(key, std::move(v));
  }
}

} // namespace dfn
