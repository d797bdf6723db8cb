#pragma once

#include "dfn/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace dfn {

/// One scalar/array config value. Numbers are stored as double; integers
/// round-trip exactly up to 2^53 which covers every count used here.
using ConfigValue = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

/// Flat dotted-key view of a config file ("negative.kappa1.family" -> value).
/// Reads mark keys as consumed so a loader can reject unknown keys.
class ConfigMap {
public:
  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }
  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  double get_number(const std::string& key) const;
  double get_number_or(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::vector<double> get_array(const std::string& key) const;
  std::vector<double> get_array_or(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  /// Keys present in the file but never read by any getter.
  std::vector<std::string> unconsumed() const;
  /// All keys with a given prefix ("negative.kappa1.").
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void mark_consumed(const std::string& key) const { consumed_.insert(key); }

  const std::map<std::string, ConfigValue>& raw() const { return values_; }

private:
  const ConfigValue& at(const std::string& key) const;

  std::map<std::string, ConfigValue> values_;
  mutable std::set<std::string> consumed_;
};

/// Parse a config file; the format is chosen by extension (.toml or .json).
ConfigMap load_config(const std::string& path);

/// Parse TOML text (the subset used by the shipped configs: [table] headers,
/// dotted keys, numbers, strings, booleans, flat arrays, # comments).
ConfigMap parse_toml(const std::string& text);

/// Parse JSON text (nested objects flattened to dotted keys).
ConfigMap parse_json(const std::string& text);

/// Apply "key=value" overrides on top of a parsed map. Values are parsed with
/// the TOML value grammar.
void apply_overrides(ConfigMap& map, const std::map<std::string, std::string>& overrides);

} // namespace dfn
