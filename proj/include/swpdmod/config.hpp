#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swpdmod/errors.hpp"

namespace swpdmod {

// key=value config grammar: one key per line, '#' starts a comment, blank
// lines ignored. Typed getters mark keys consumed; finish() rejects anything
// left over so a typo fails loudly instead of silently falling back to a
// default. Several typed configs may share one file: each parser consumes
// its own keys and the caller runs finish() once at the end.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_text(const std::string& text, std::string origin = "<memory>");

  // Command-line overrides beat file values; they report "command line"
  // instead of a line number in diagnostics.
  void set_override(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  std::optional<std::string> get_optional_string(const std::string& key);
  double get_double(const std::string& key, double fallback);
  std::optional<double> get_optional_double(const std::string& key);
  int get_int(const std::string& key, int fallback);
  uint64_t get_uint64(const std::string& key, uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback);
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);

  double require_double(const std::string& key);
  int require_int(const std::string& key);

  // Throws ConfigError naming the first unconsumed key and its line.
  void finish() const;

  // Invariant-violation helper: reports the key with its source location.
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::map<std::string, std::string> raw_entries() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;  // 0 = command line
    mutable bool consumed = false;
  };

  std::string origin_ = "<memory>";
  std::map<std::string, Entry> entries_;

  const Entry* find(const std::string& key) const;
  std::string location(const Entry& e) const;
};

}  // namespace swpdmod
