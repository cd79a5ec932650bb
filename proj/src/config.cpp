#include "swpdmod/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace swpdmod {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) parts.push_back(trim(cur));
  return parts;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path.string());
}

KeyValueConfig KeyValueConfig::from_text(const std::string& text, std::string origin) {
  KeyValueConfig cfg;
  cfg.origin_ = std::move(origin);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": empty key");
    auto [it, inserted] = cfg.entries_.emplace(key, Entry{value, lineno});
    if (!inserted)
      throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                        "' (first set at line " + std::to_string(it->second.line) + ")");
  }
  return cfg;
}

void KeyValueConfig::set_override(const std::string& key, const std::string& value) {
  entries_[key] = Entry{value, 0};
}

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string KeyValueConfig::location(const Entry& e) const {
  if (e.line == 0) return "command line";
  return origin_ + ":" + std::to_string(e.line);
}

bool KeyValueConfig::has(const std::string& key) const { return find(key) != nullptr; }

void KeyValueConfig::fail(const std::string& key, const std::string& message) const {
  const Entry* e = find(key);
  const std::string where = e ? location(*e) : origin_;
  throw ConfigError(where + ": key '" + key + "': " + message);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  return e->value;
}

std::optional<std::string> KeyValueConfig::get_optional_string(const std::string& key) {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  e->consumed = true;
  return e->value;
}

std::optional<double> KeyValueConfig::get_optional_double(const std::string& key) {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  e->consumed = true;
  double v = 0.0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    fail(key, "not a number: '" + e->value + "'");
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  auto v = get_optional_double(key);
  return v ? *v : fallback;
}

double KeyValueConfig::require_double(const std::string& key) {
  auto v = get_optional_double(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return *v;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  int v = 0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    fail(key, "not an integer: '" + e->value + "'");
  return v;
}

int KeyValueConfig::require_int(const std::string& key) {
  if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return get_int(key, 0);
}

uint64_t KeyValueConfig::get_uint64(const std::string& key, uint64_t fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  uint64_t v = 0;
  auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
    fail(key, "not an unsigned integer: '" + e->value + "'");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  const std::string& v = e->value;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(key, "not a boolean (use 1/0/true/false/yes/no/on/off): '" + v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  std::vector<double> out;
  for (const std::string& part : split_commas(e->value)) {
    double v = 0.0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size())
      fail(key, "list entry is not a number: '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(key, "empty list");
  return out;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  e->consumed = true;
  std::vector<int> out;
  for (const std::string& part : split_commas(e->value)) {
    int v = 0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size())
      fail(key, "list entry is not an integer: '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(key, "empty list");
  return out;
}

void KeyValueConfig::finish() const {
  for (const auto& [key, entry] : entries_) {
    if (!entry.consumed)
      throw ConfigError(location(entry) + ": unknown key '" + key + "'");
  }
}

std::map<std::string, std::string> KeyValueConfig::raw_entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, entry] : entries_) out.emplace(key, entry.value);
  return out;
}

}  // namespace swpdmod
