#pragma once

#include "icgp/types.hpp"

#include <Eigen/Dense>

namespace icgp {

// Equidistant partition of (a, b] into C bins.
struct Partition {
  double a = 0.0;
  double b = 1.0;
  int C = 1;

  // Throws InvalidPartition unless a < b (both finite) and C >= 1.
  static Partition make(double a, double b, int C);
  void validate() const;

  double width() const { return (b - a) / C; }
  // Edge c in [0, C]; edge(0) == a and edge(C) == b exactly.
  double edge(int c) const;
  double midpoint(int c) const;
  Eigen::VectorXd midpoints() const;

  bool operator==(const Partition& other) const {
    return a == other.a && b == other.b && C == other.C;
  }
};

struct BinnedDistribution {
  Partition partition;
  Eigen::VectorXd probs;

  double density(int c) const { return probs[c] / partition.width(); }
};

// psi(mean, var) = (mean / var, -1 / (2 var)).
struct NaturalParams {
  double theta1 = 0.0;
  double theta2 = -0.5;
};

NaturalParams natural_params(const PPDMoments& m);

// Row c is T(xi_c) = (xi_c, xi_c^2) at the bin midpoints.
Eigen::MatrixX2d sufficient_stats(const Partition& partition);

// Max-shifted softmax of arbitrary logits over the partition's bins.
BinnedDistribution softmax_binned(const Eigen::VectorXd& logits, const Partition& partition);

// Logits <psi(m), T(xi_c)>, then softmax. Throws InvalidMoments if var <= 0
// or either moment is non-finite.
BinnedDistribution head_binned(const PPDMoments& m, const Partition& partition);

double tv_distance(const BinnedDistribution& p, const BinnedDistribution& q);

// TV between the continuous density of `ppd` truncated to (a, b] and the
// piecewise-constant density of `q`. Each bin is split at the points where
// the two densities cross, so the integral is exact up to root-finding
// tolerance (exact crossings in closed form for a single Gaussian).
double tv_continuous(const MixturePPD& ppd, const BinnedDistribution& q);

// Piecewise-linear CDF inverse. Levels outside (0, 1) are clamped to a / b.
double quantile(const BinnedDistribution& p, double level);

struct Coverage {
  bool covered = false;
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

// Central interval [quantile((1-level)/2), quantile((1+level)/2)], closed.
Coverage coverage_and_width(const BinnedDistribution& p, double y, double level);

// Integral over the real line of (F(t) - 1{t >= y})^2 with F the binned CDF
// (0 below a, 1 above b). For y in (a, b] this equals the integral over (a, b].
double crps(const BinnedDistribution& p, double y);

struct BinnedMoments {
  double m1 = 0.0;
  double m2 = 0.0;
};

BinnedMoments moment_readback(const BinnedDistribution& p);

}  // namespace icgp
