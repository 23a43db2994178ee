#pragma once

namespace icgp::normal {

double pdf(double z);
double cdf(double z);
// Upper tail 1 - cdf(z), accurate for large z.
double sf(double z);
// Inverse of cdf on (0, 1).
double quantile(double p);
// Inverse of sf on (0, 1).
double sf_quantile(double q);

// P(lo < X <= hi) for X ~ N(mean, var), computed on whichever tail keeps
// the difference well conditioned.
double interval_mass(double mean, double var, double lo, double hi);

}  // namespace icgp::normal
