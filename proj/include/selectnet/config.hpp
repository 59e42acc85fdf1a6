#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace selectnet {

/// Flat `key = value` settings. Blank lines and lines starting with '#' are
/// ignored; later assignments win. Every read marks the key as used so that
/// leftovers can be reported as unknown.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues load(const std::filesystem::path& path);

  /// Parses "key=value".
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::uint64_t> get_seed_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Keys present but never read.
  std::vector<std::string> unused() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace selectnet
