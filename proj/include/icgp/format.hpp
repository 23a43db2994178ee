#pragma once

#include <string>

namespace icgp {

// Shortest decimal form that round-trips to the same double; output does not
// depend on the locale, so files built from it are byte-stable.
std::string format_double(double v);

// Parses a whole string (surrounding blanks allowed) as a double; returns
// false on any trailing garbage.
bool parse_double(const std::string& text, double& out);

}  // namespace icgp
