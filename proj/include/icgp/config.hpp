#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace icgp {

// Flat key=value configuration. Lines starting with '#' and blank lines are
// ignored; later assignments override earlier ones. Values are kept as the
// exact strings given, so a resolved config written back out and re-read is
// identical.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  // Throws IoError if the file cannot be read.
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  // "key=value"; throws ConfigError without '='.
  void apply_override(const std::string& assignment);
  // Fills every key of `defaults` that is not already set.
  void merge_defaults(const Config& defaults);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Typed getters throw ConfigError naming the key on a missing key or a
  // malformed value.
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // Comma-separated lists; "a:b:step" expands an inclusive integer range.
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Sorted "key=value\n" lines.
  std::string canonical() const;
  // FNV-1a over canonical().
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace icgp
