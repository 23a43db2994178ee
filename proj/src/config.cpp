#include "icgp/config.hpp"

#include "icgp/errors.hpp"
#include "icgp/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace icgp {

namespace {

std::string trim(const std::string& s) {
  const auto lo = s.find_first_not_of(" \t\r");
  if (lo == std::string::npos) return "";
  const auto hi = s.find_last_not_of(" \t\r");
  return s.substr(lo, hi - lo + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

bool parse_int(const std::string& text, std::int64_t& out) {
  const std::string t = trim(text);
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && first != t.data() + t.size();
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) { values_[trim(key)] = trim(value); }

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw ConfigError("override must look like key=value, got '" + assignment + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void Config::merge_defaults(const Config& defaults) {
  for (const auto& [k, v] : defaults.values_) values_.emplace(k, v);
}

std::string Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  double v;
  if (!parse_double(get_string(key), v))
    throw ConfigError("config key '" + key + "' is not a number: '" + get_string(key) + "'");
  return v;
}

std::int64_t Config::get_int(const std::string& key) const {
  std::int64_t v;
  if (!parse_int(get_string(key), v))
    throw ConfigError("config key '" + key + "' is not an integer: '" + get_string(key) + "'");
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(get_string(key), ',')) {
    double v;
    if (!parse_double(part, v))
      throw ConfigError("config key '" + key + "': bad list entry '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' is an empty list");
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& part : split(get_string(key), ',')) {
    const auto range = split(part, ':');
    std::int64_t lo, hi, step = 1;
    if (range.size() == 1 && parse_int(range[0], lo)) {
      out.push_back(static_cast<int>(lo));
      continue;
    }
    if ((range.size() == 2 || range.size() == 3) && parse_int(range[0], lo) &&
        parse_int(range[1], hi) && (range.size() == 2 || parse_int(range[2], step)) && step > 0 &&
        lo <= hi) {
      for (std::int64_t v = lo; v <= hi; v += step) out.push_back(static_cast<int>(v));
      continue;
    }
    throw ConfigError("config key '" + key + "': bad list entry '" + part + "'");
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' is an empty list");
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
  std::vector<std::string> out;
  for (auto& part : split(get_string(key), ','))
    if (!part.empty()) out.push_back(part);
  if (out.empty()) throw ConfigError("config key '" + key + "' is an empty list");
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Config::hash() const { return fnv1a(canonical()); }

std::string Config::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace icgp
