#include "icgp/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace icgp::normal {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

double pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double cdf(double z) {
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  if (z == std::numeric_limits<double>::infinity()) return 1.0;
  return 0.5 * boost::math::erfc(-z * kInvSqrt2);
}

double sf(double z) { return cdf(-z); }

double quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sf_quantile(double q) { return -quantile(q); }

double interval_mass(double mean, double var, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  const double sd = std::sqrt(var);
  const double zl = (lo - mean) / sd;
  const double zh = (hi - mean) / sd;
  if (zl > 0.0) return sf(zl) - sf(zh);
  return cdf(zh) - cdf(zl);
}

}  // namespace icgp::normal
