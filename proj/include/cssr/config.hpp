#pragma once

#include <map>
#include <string>
#include <vector>

#include "cssr/tensor.hpp"

namespace cssr {

// "key = value" config file: one pair per line, '#' starts a comment,
// whitespace around keys/values is trimmed. Typed getters throw ConfigError
// on malformed values; consume() tracking lets the caller reject unknown keys.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key, long long fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Comma-separated integer list, e.g. "64,128,256".
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);

  // Throws ConfigError naming every key no getter consumed.
  void reject_unknown_keys() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> consumed_;

  const std::string* lookup(const std::string& key);
};

}  // namespace cssr
