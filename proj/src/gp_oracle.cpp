#include "icgp/gp_oracle.hpp"

#include "icgp/errors.hpp"
#include "icgp/log.hpp"
#include "icgp/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace icgp {

void ContextSet::validate() const {
  if (X.rows() < 1) throw InvalidInput("context must hold at least one point");
  if (Y.size() != X.rows())
    throw InvalidInput("context has " + std::to_string(X.rows()) + " inputs but " +
                       std::to_string(Y.size()) + " labels");
  if (x_query.size() != X.cols())
    throw InvalidInput("query has dimension " + std::to_string(x_query.size()) +
                       ", context inputs have " + std::to_string(X.cols()));
  if (!X.allFinite() || !Y.allFinite() || !x_query.allFinite())
    throw InvalidInput("context contains non-finite entries");
}

double MixturePPD::mean() const {
  double acc = 0.0;
  for (const auto& c : components) acc += c.weight * c.moments.mean;
  return acc;
}

double MixturePPD::second_moment() const {
  double acc = 0.0;
  for (const auto& c : components)
    acc += c.weight * (c.moments.var + c.moments.mean * c.moments.mean);
  return acc;
}

RidgeFactor::RidgeFactor(const GramMatrix& G, double sigma2) {
  if (!(sigma2 > 0.0)) throw InvalidInput("noise variance must be positive");
  const Eigen::Index n = G.n();
  Eigen::MatrixXd A = G.values;
  A.diagonal().array() += sigma2;
  llt_.compute(A);
  if (llt_.info() == Eigen::Success) return;

  jitter_ = 1e-10 * A.trace() / static_cast<double>(n);
  A.diagonal().array() += jitter_;
  llt_.compute(A);
  if (llt_.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Cholesky of G + sigma2 I failed after jitter " << jitter_ << " (n=" << n
        << ", sigma2=" << sigma2 << ", trace=" << A.trace() << ")";
    throw NumericError(msg.str());
  }
  warn("Cholesky needed diagonal jitter " + std::to_string(jitter_));
}

Eigen::VectorXd RidgeFactor::solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

Eigen::VectorXd RidgeFactor::color(const Eigen::VectorXd& z) const {
  return llt_.matrixL() * z;
}

double RidgeFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

PPDMoments exact_moments(const KernelSpec& spec, double sigma2, const ContextSet& ctx,
                         MomentDiagnostics* diag) {
  ctx.validate();
  const RidgeFactor factor(gram(spec, ctx.X), sigma2);
  return exact_moments(spec, sigma2, ctx, factor, diag);
}

PPDMoments exact_moments(const KernelSpec& spec, double sigma2, const ContextSet& ctx,
                         const RidgeFactor& factor, MomentDiagnostics* diag) {
  ctx.validate();
  if (factor.n() != ctx.n()) throw InvalidInput("factor size does not match context");
  const Eigen::VectorXd kx = cross_vector(spec, ctx.X, ctx.x_query);
  const Eigen::VectorXd alpha = factor.solve(ctx.Y);
  const Eigen::VectorXd beta = factor.solve(kx);
  const double kxx = spec(ctx.x_query, ctx.x_query);

  PPDMoments m;
  m.mean = kx.dot(alpha);
  m.var = kxx + sigma2 - kx.dot(beta);
  bool clamped = false;
  const double floor = sigma2 * (1.0 - 1e-10);
  if (m.var < floor) {
    warn("predictive variance " + std::to_string(m.var) + " below noise floor " +
         std::to_string(sigma2) + "; clamped");
    m.var = floor;
    clamped = true;
  }
  if (diag) {
    diag->jitter = factor.jitter();
    diag->var_clamped = clamped;
  }
  return m;
}

double log_marginal_likelihood(const KernelSpec& spec, double sigma2, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& Y) {
  if (Y.size() != X.rows()) throw InvalidInput("label count does not match inputs");
  const RidgeFactor factor(gram(spec, X), sigma2);
  const double n = static_cast<double>(X.rows());
  return -0.5 * Y.dot(factor.solve(Y)) - 0.5 * factor.log_det() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

HyperPrior HyperPrior::default_grid() {
  HyperPrior prior;
  for (double l : {0.4, 0.8, 1.2})
    for (double s : {0.1, 0.2, 0.3}) prior.components.push_back({l, s, 1.0 / 9.0});
  return prior;
}

void HyperPrior::validate() const {
  if (components.empty()) throw InvalidInput("hyperprior has no components");
  if (!(amplitude > 0.0)) throw InvalidKernel("hyperprior amplitude must be positive");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw InvalidInput("hyperprior weights must be positive");
    if (!(c.lengthscale > 0.0) || !(c.noise_sd > 0.0))
      throw InvalidKernel("hyperprior lengthscales and noise levels must be positive");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidInput("hyperprior weights sum to " + std::to_string(total) + ", not 1");
}

KernelSpec HyperPrior::kernel(std::size_t h) const {
  return KernelSpec::rbf(amplitude, components.at(h).lengthscale);
}

double HyperPrior::sigma2(std::size_t h) const {
  const double s = components.at(h).noise_sd;
  return s * s;
}

MixturePPD hierarchical_mixture(const HyperPrior& prior, const ContextSet& ctx) {
  prior.validate();
  ctx.validate();
  const std::size_t H = prior.components.size();
  std::vector<double> logw(H);
  MixturePPD out;
  out.components.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    const KernelSpec spec = prior.kernel(h);
    const double s2 = prior.sigma2(h);
    const RidgeFactor factor(gram(spec, ctx.X), s2);
    const double n = static_cast<double>(ctx.n());
    const double lml = -0.5 * ctx.Y.dot(factor.solve(ctx.Y)) - 0.5 * factor.log_det() -
                       0.5 * n * std::log(2.0 * std::numbers::pi);
    logw[h] = std::log(prior.components[h].weight) + lml;
    out.components[h].moments = exact_moments(spec, s2, ctx, factor);
  }
  if (H == 1) {
    out.components[0].weight = 1.0;
    return out;
  }
  double top = logw[0];
  for (double v : logw) top = std::max(top, v);
  double total = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    out.components[h].weight = std::exp(logw[h] - top);
    total += out.components[h].weight;
  }
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericError("hierarchical mixture weights are degenerate");
  for (auto& c : out.components) c.weight /= total;
  return out;
}

BinnedDistribution reference_binned(const PPDMoments& ppd, const Partition& partition) {
  return reference_binned(MixturePPD::single(ppd), partition);
}

BinnedDistribution reference_binned(const MixturePPD& ppd, const Partition& partition) {
  partition.validate();
  for (const auto& c : ppd.components)
    if (!(c.moments.var > 0.0) || !std::isfinite(c.moments.mean))
      throw InvalidMoments("reference_binned: component with non-positive variance");
  BinnedDistribution out{partition, Eigen::VectorXd::Zero(partition.C)};
  for (int c = 0; c < partition.C; ++c) {
    const double lo = partition.edge(c);
    const double hi = partition.edge(c + 1);
    double acc = 0.0;
    for (const auto& comp : ppd.components)
      acc += comp.weight * normal::interval_mass(comp.moments.mean, comp.moments.var, lo, hi);
    out.probs[c] = acc;
  }
  const double interior = out.probs.sum();
  if (!(interior >= 1e-12)) {
    std::ostringstream msg;
    msg << "truncation to (" << partition.a << ", " << partition.b
        << "] keeps only mass " << interior;
    throw InvalidPartition(msg.str());
  }
  out.probs /= interior;
  return out;
}

double tail_mass(const MixturePPD& ppd, double a, double b) {
  double inside = 0.0;
  for (const auto& comp : ppd.components)
    inside += comp.weight * normal::interval_mass(comp.moments.mean, comp.moments.var, a, b);
  return std::max(0.0, 1.0 - inside);
}

TruncatedMoments truncated_moments(const MixturePPD& ppd, double a, double b) {
  double mass = 0.0, s1 = 0.0, s2 = 0.0;
  for (const auto& comp : ppd.components) {
    const double mu = comp.moments.mean;
    const double sd = std::sqrt(comp.moments.var);
    const double z = normal::interval_mass(mu, comp.moments.var, a, b);
    if (!(z > 0.0)) continue;
    const double lo = (a - mu) / sd, hi = (b - mu) / sd;
    const double pa = std::isfinite(lo) ? normal::pdf(lo) : 0.0;
    const double pb = std::isfinite(hi) ? normal::pdf(hi) : 0.0;
    const double la = std::isfinite(lo) ? lo * pa : 0.0;
    const double lb = std::isfinite(hi) ? hi * pb : 0.0;
    const double shift = (pa - pb) / z;
    const double mean = mu + sd * shift;
    const double var = comp.moments.var * (1.0 + (la - lb) / z - shift * shift);
    mass += comp.weight * z;
    s1 += comp.weight * z * mean;
    s2 += comp.weight * z * (var + mean * mean);
  }
  if (!(mass > 0.0)) throw InvalidPartition("truncated_moments: no mass on (a, b]");
  return {s1 / mass, s2 / mass};
}

HyperCandidate empirical_bayes_fit(const std::vector<HyperCandidate>& grid,
                                   const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                   std::vector<double>* scores) {
  if (grid.empty()) throw InvalidInput("empirical_bayes_fit: empty grid");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  if (scores) scores->clear();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = log_marginal_likelihood(grid[i].kernel, grid[i].sigma2, X, Y);
    if (scores) scores->push_back(s);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return grid[best];
}

}  // namespace icgp
