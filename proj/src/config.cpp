#include "typodiff/config.hpp"

#include <sstream>

namespace td {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::from_text(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ArgumentError("config line " + std::to_string(lineno) + ": empty key");
    c.kv[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::from_file(const std::string& path) { return from_text(read_file_text(path)); }

std::string Config::get_str(const std::string& key, const std::string& def) const {
  auto it = kv.find(key);
  return it == kv.end() ? def : it->second;
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    size_t pos = 0;
    int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("config: key '" + key + "' is not an integer: " + it->second);
  }
}

double Config::get_float(const std::string& key, double def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("config: key '" + key + "' is not a number: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("config: key '" + key + "' is not a boolean: " + v);
}

std::vector<int> Config::get_int_list(const std::string& key, const std::vector<int>& def) const {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  std::vector<int> out;
  std::istringstream in(it->second);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ArgumentError("config: key '" + key + "' is not an int list: " + it->second);
    }
  }
  if (out.empty())
    throw ArgumentError("config: key '" + key + "' is an empty list");
  return out;
}

void Config::restrict_keys(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : kv)
    if (!allowed.count(k)) throw ArgumentError("config: unknown key '" + k + "'");
}

}  // namespace td
