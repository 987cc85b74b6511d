#include "proxsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace proxsim {
namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& raw, const std::string& key, int line) {
  try {
    size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + raw + "'",
                      line);
  }
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& source_name) {
  ConfigFile cfg;
  cfg.source_ = source_name;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected 'key = value'", line_number);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key", line_number);
    if (value.empty())
      throw ConfigError("config: key '" + key + "' has empty value", line_number);
    if (cfg.entries_.count(key))
      throw ConfigError("config: duplicate key '" + key + "' (first at line " +
                            std::to_string(cfg.entries_[key].line) + ")",
                        line_number);
    cfg.entries_[key] = Entry{value, line_number, false};
  }
  return cfg;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.consumed = true;
  return &it->second;
}

const ConfigFile::Entry& ConfigFile::require(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError("config: missing required key '" + key + "' in " + source_);
  return *e;
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) > 0; }

double ConfigFile::get_double(const std::string& key) const {
  const Entry& e = require(key);
  return parse_number(e.raw, key, e.line);
}

double ConfigFile::get_double_or(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  return e ? parse_number(e->raw, key, e->line) : fallback;
}

int ConfigFile::get_int(const std::string& key) const {
  const Entry& e = require(key);
  const double v = parse_number(e.raw, key, e.line);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError("config: key '" + key + "' must be an integer", e.line);
  return i;
}

int ConfigFile::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool ConfigFile::get_bool_or(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::string v = e->raw;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' must be a boolean", e->line);
}

std::string ConfigFile::get_string_or(const std::string& key,
                                      const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->raw : fallback;
}

std::vector<double> ConfigFile::get_double_list(const std::string& key) const {
  const Entry& e = require(key);
  std::string raw = e.raw;
  if (!raw.empty() && raw.front() == '[' && raw.back() == ']')
    raw = raw.substr(1, raw.size() - 2);
  std::vector<double> out;
  std::string item;
  std::istringstream ss(raw);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number(item, key, e.line));
  }
  if (out.empty())
    throw ConfigError("config: key '" + key + "' has an empty list", e.line);
  return out;
}

std::vector<double> ConfigFile::get_double_list_or(
    const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_double_list(key) : fallback;
}

void ConfigFile::require_all_consumed() const {
  std::string bad;
  for (const auto& [key, entry] : entries_)
    if (!entry.consumed)
      bad += (bad.empty() ? "" : ", ") + key + " (line " + std::to_string(entry.line) + ")";
  if (!bad.empty())
    throw ConfigError("config: unknown key(s) in " + source_ + ": " + bad);
}

}  // namespace proxsim
