#include "icgp/ppd_head.hpp"

#include "icgp/errors.hpp"
#include "icgp/normal.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace icgp {

Partition Partition::make(double a, double b, int C) {
  Partition p{a, b, C};
  p.validate();
  return p;
}

void Partition::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
    throw InvalidPartition("partition needs finite a < b, got (" + std::to_string(a) + ", " +
                           std::to_string(b) + "]");
  if (C < 1) throw InvalidPartition("partition needs at least one bin");
}

double Partition::edge(int c) const {
  if (c <= 0) return a;
  if (c >= C) return b;
  return a + c * width();
}

double Partition::midpoint(int c) const { return a + (c + 0.5) * width(); }

Eigen::VectorXd Partition::midpoints() const {
  Eigen::VectorXd xi(C);
  for (int c = 0; c < C; ++c) xi[c] = midpoint(c);
  return xi;
}

NaturalParams natural_params(const PPDMoments& m) {
  if (!std::isfinite(m.mean) || !std::isfinite(m.var) || !(m.var > 0.0))
    throw InvalidMoments("head needs finite moments with var > 0, got mean=" +
                         std::to_string(m.mean) + " var=" + std::to_string(m.var));
  return {m.mean / m.var, -0.5 / m.var};
}

Eigen::MatrixX2d sufficient_stats(const Partition& partition) {
  Eigen::MatrixX2d T(partition.C, 2);
  for (int c = 0; c < partition.C; ++c) {
    const double xi = partition.midpoint(c);
    T(c, 0) = xi;
    T(c, 1) = xi * xi;
  }
  return T;
}

BinnedDistribution softmax_binned(const Eigen::VectorXd& logits, const Partition& partition) {
  partition.validate();
  if (logits.size() != partition.C) throw InvalidInput("softmax_binned: logit count != C");
  BinnedDistribution out{partition, Eigen::VectorXd(partition.C)};
  const double top = logits.maxCoeff();
  double total = 0.0;
  for (int c = 0; c < partition.C; ++c) {
    out.probs[c] = std::exp(logits[c] - top);
    total += out.probs[c];
  }
  out.probs /= total;
  return out;
}

BinnedDistribution head_binned(const PPDMoments& m, const Partition& partition) {
  const NaturalParams theta = natural_params(m);
  const Eigen::MatrixX2d T = sufficient_stats(partition);
  const Eigen::VectorXd logits = T.col(0) * theta.theta1 + T.col(1) * theta.theta2;
  return softmax_binned(logits, partition);
}

double tv_distance(const BinnedDistribution& p, const BinnedDistribution& q) {
  if (!(p.partition == q.partition) || p.probs.size() != q.probs.size())
    throw InvalidPartition("tv_distance: partitions differ");
  double acc = 0.0;
  for (Eigen::Index c = 0; c < p.probs.size(); ++c) acc += std::abs(p.probs[c] - q.probs[c]);
  return 0.5 * acc;
}

namespace {

struct TruncatedMixture {
  const MixturePPD& ppd;
  double norm;

  double pdf(double t) const {
    double acc = 0.0;
    for (const auto& comp : ppd.components) {
      const double sd = std::sqrt(comp.moments.var);
      acc += comp.weight * normal::pdf((t - comp.moments.mean) / sd) / sd;
    }
    return acc / norm;
  }
  double mass(double lo, double hi) const {
    double acc = 0.0;
    for (const auto& comp : ppd.components)
      acc += comp.weight * normal::interval_mass(comp.moments.mean, comp.moments.var, lo, hi);
    return acc / norm;
  }
};

// Points in (lo, hi) where the truncated density equals `level`.
void crossings(const TruncatedMixture& f, double level, double lo, double hi,
               std::vector<double>& out) {
  const auto& comps = f.ppd.components;
  if (comps.size() == 1) {
    const double mu = comps[0].moments.mean;
    const double var = comps[0].moments.var;
    const double peak = comps[0].weight / (f.norm * std::sqrt(2.0 * std::numbers::pi * var));
    if (!(level > 0.0) || level >= peak) return;
    const double half = std::sqrt(2.0 * var * std::log(peak / level));
    for (double r : {mu - half, mu + half})
      if (r > lo && r < hi) out.push_back(r);
    return;
  }
  std::vector<double> grid;
  constexpr int kSub = 16;
  for (int i = 0; i <= kSub; ++i) grid.push_back(lo + (hi - lo) * i / kSub);
  for (const auto& comp : comps)
    if (comp.moments.mean > lo && comp.moments.mean < hi) grid.push_back(comp.moments.mean);
  std::sort(grid.begin(), grid.end());
  auto g = [&](double t) { return f.pdf(t) - level; };
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double g0 = g(grid[i]);
    const double g1 = g(grid[i + 1]);
    if (g0 == 0.0 && i > 0) out.push_back(grid[i]);
    if ((g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0)) {
      std::uintmax_t iters = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(52);
      const auto r = boost::math::tools::toms748_solve(g, grid[i], grid[i + 1], g0, g1, tol, iters);
      out.push_back(0.5 * (r.first + r.second));
    }
  }
}

}  // namespace

double tv_continuous(const MixturePPD& ppd, const BinnedDistribution& q) {
  const Partition& part = q.partition;
  double total_mass = 0.0;
  for (const auto& comp : ppd.components)
    total_mass +=
        comp.weight * normal::interval_mass(comp.moments.mean, comp.moments.var, part.a, part.b);
  if (!(total_mass > 1e-12))
    throw InvalidPartition("tv_continuous: reference places no mass on (a, b]");
  const TruncatedMixture f{ppd, total_mass};

  double acc = 0.0;
  std::vector<double> cuts;
  for (int c = 0; c < part.C; ++c) {
    const double lo = part.edge(c);
    const double hi = part.edge(c + 1);
    const double level = q.probs[c] / (hi - lo);
    cuts.assign({lo, hi});
    crossings(f, level, lo, hi, cuts);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double l = cuts[i];
      const double r = cuts[i + 1];
      acc += std::abs(f.mass(l, r) - level * (r - l));
    }
  }
  return 0.5 * acc;
}

double quantile(const BinnedDistribution& p, double level) {
  const Partition& part = p.partition;
  if (!(level > 0.0)) return part.a;
  if (!(level < 1.0)) return part.b;
  double cum = 0.0;
  for (int c = 0; c < part.C; ++c) {
    const double mass = p.probs[c];
    const double next = cum + mass;
    if (next == level) return part.edge(c + 1);
    if (next > level && mass > 0.0) {
      const double frac = std::clamp((level - cum) / mass, 0.0, 1.0);
      return part.edge(c) + frac * part.width();
    }
    cum = next;
  }
  return part.b;
}

Coverage coverage_and_width(const BinnedDistribution& p, double y, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidInput("coverage level must lie in (0, 1), got " + std::to_string(level));
  Coverage out;
  out.lower = quantile(p, 0.5 * (1.0 - level));
  out.upper = quantile(p, 0.5 * (1.0 + level));
  out.covered = y >= out.lower && y <= out.upper;
  return out;
}

double crps(const BinnedDistribution& p, double y) {
  const Partition& part = p.partition;
  // Integral of a linear function's square over a segment of length h.
  auto seg = [](double h, double g0, double g1) { return h * (g0 * g0 + g0 * g1 + g1 * g1) / 3.0; };

  double acc = 0.0;
  if (y < part.a) acc += part.a - y;
  if (y > part.b) acc += y - part.b;

  double cum = 0.0;
  for (int c = 0; c < part.C; ++c) {
    const double lo = part.edge(c);
    const double hi = part.edge(c + 1);
    const double F0 = cum;
    const double F1 = cum + p.probs[c];
    if (y <= lo) {
      acc += seg(hi - lo, F0 - 1.0, F1 - 1.0);
    } else if (y >= hi) {
      acc += seg(hi - lo, F0, F1);
    } else {
      const double Fy = F0 + (F1 - F0) * (y - lo) / (hi - lo);
      acc += seg(y - lo, F0, Fy);
      acc += seg(hi - y, Fy - 1.0, F1 - 1.0);
    }
    cum = F1;
  }
  return acc;
}

BinnedMoments moment_readback(const BinnedDistribution& p) {
  BinnedMoments m;
  for (int c = 0; c < p.partition.C; ++c) {
    const double xi = p.partition.midpoint(c);
    m.m1 += p.probs[c] * xi;
    m.m2 += p.probs[c] * xi * xi;
  }
  return m;
}

}  // namespace icgp
