#include "icgp/format.hpp"

#include <charconv>
#include <cmath>

namespace icgp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& text, double& out) {
  std::size_t lo = 0;
  std::size_t hi = text.size();
  while (lo < hi && (text[lo] == ' ' || text[lo] == '\t')) ++lo;
  while (hi > lo && (text[hi - 1] == ' ' || text[hi - 1] == '\t')) --hi;
  if (lo == hi) return false;
  const char* first = text.data() + lo;
  const char* last = text.data() + hi;
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace icgp
