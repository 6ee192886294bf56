#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "typodiff/core.hpp"

namespace td {

// UTF-8 key=value run configuration. '#' starts a comment, blank lines
// ignored, first '=' splits key from value. CLI flags are merged on top.
struct Config {
  std::map<std::string, std::string> kv;

  static Config from_text(const std::string& text);
  static Config from_file(const std::string& path);

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv[key] = value; }

  std::string get_str(const std::string& key, const std::string& def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  double get_float(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const;

  // Throws ArgumentError naming the first key outside `allowed`.
  void restrict_keys(const std::set<std::string>& allowed) const;
};

}  // namespace td
