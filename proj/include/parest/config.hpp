#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parest {

enum class ValueType { integer, real, text, choice, real_list, text_list, boolean };
const char* value_type_name(ValueType t);

struct SchemaEntry {
  std::string key;
  ValueType type = ValueType::text;
  std::string default_value;  // empty: no default
  std::string description;
  std::vector<std::string> choices;  // choice and text_list kinds
  std::optional<double> minimum;
  bool required = false;
};

const std::vector<SchemaEntry>& config_schema();
const SchemaEntry* find_schema_entry(std::string_view key);

/// Flat configuration: one `key = value` per line, dotted keys, `#` starts a comment.
/// Every key is checked against the schema when parsed.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  /// Value set explicitly in the file (no default applied).
  bool is_set(const std::string& key) const { return set_.count(key) > 0; }
  int line_of(const std::string& key) const;

  std::string text(const std::string& key) const;
  int integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
  std::vector<std::string> text_list(const std::string& key) const;

  /// Every schema key with its effective value (defaults filled in).
  std::map<std::string, std::string> effective() const;
  void set(const std::string& key, const std::string& value);

 private:
  std::string raw(const std::string& key) const;

  std::map<std::string, std::string> set_;
  std::map<std::string, int> lines_;
};

}  // namespace parest
