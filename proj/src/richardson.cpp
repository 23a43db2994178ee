#include "icgp/richardson.hpp"

#include "icgp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace icgp {

StepSchedule StepSchedule::constant(double eta) { return {Mode::Constant, {eta}}; }

StepSchedule StepSchedule::per_layer(std::vector<double> etas) {
  return {Mode::PerLayer, std::move(etas)};
}

void StepSchedule::validate(int steps) const {
  if (eta.empty()) throw InvalidInput("step schedule is empty");
  for (double e : eta)
    if (!std::isfinite(e) || e < 0.0)
      throw InvalidInput("step sizes must be finite and nonnegative, got " + std::to_string(e));
  if (mode == Mode::Constant && eta.size() != 1)
    throw InvalidInput("constant schedule must hold exactly one step size");
  if (mode == Mode::PerLayer && static_cast<int>(eta.size()) != steps)
    throw InvalidInput("per-layer schedule has " + std::to_string(eta.size()) +
                       " steps, expected " + std::to_string(steps));
}

namespace {

constexpr double kDivergenceThreshold = 1e12;

bool blown_up(double v) { return !std::isfinite(v) || std::abs(v) > kDivergenceThreshold; }

SolverTrajectory run(const GramMatrix& G, const Eigen::VectorXd& k_x, const Eigen::VectorXd& v,
                     double sigma2, const StepSchedule& schedule, int L,
                     const Eigen::VectorXd* inv_scale, double query_inv_scale) {
  const Eigen::Index n = G.n();
  if (k_x.size() != n || v.size() != n)
    throw InvalidInput("richardson: k_x and v must have one entry per context point");
  if (L < 0) throw InvalidInput("richardson: depth must be nonnegative");
  schedule.validate(L);

  SolverTrajectory traj;
  traj.context.reserve(L + 1);
  traj.query.reserve(L + 1);
  traj.context.emplace_back(Eigen::VectorXd::Zero(n));
  traj.query.push_back(0.0);

  Eigen::VectorXd residual(n);
  Eigen::VectorXd next(n);
  for (int l = 0; l < L; ++l) {
    const Eigen::VectorXd& u = traj.context.back();
    const double uq = traj.query.back();
    const double eta = schedule.at(l);
    residual = v - u;
    bool bad = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += G.values(i, j) * residual[i];
      const double step = inv_scale ? eta * (*inv_scale)[j] : eta;
      next[j] = (1.0 - step * sigma2) * u[j] + step * acc;
      bad = bad || blown_up(next[j]);
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += k_x[i] * residual[i];
    const double step = inv_scale ? eta * query_inv_scale : eta;
    const double nq = (1.0 - step * sigma2) * uq + step * acc;
    bad = bad || blown_up(nq);
    traj.diverged = traj.diverged || bad;
    traj.context.push_back(next);
    traj.query.push_back(nq);
  }
  return traj;
}

}  // namespace

SolverTrajectory richardson_run(const GramMatrix& G, const Eigen::VectorXd& k_x,
                                const Eigen::VectorXd& v, double sigma2,
                                const StepSchedule& schedule, int L) {
  return run(G, k_x, v, sigma2, schedule, L, nullptr, 1.0);
}

SolverTrajectory preconditioned_run(const GramMatrix& G, const Eigen::VectorXd& k_x,
                                    const Eigen::VectorXd& v, double sigma2,
                                    const StepSchedule& schedule, int L) {
  const Eigen::Index n = G.n();
  if (k_x.size() != n) throw InvalidInput("preconditioned_run: k_x has wrong length");
  Eigen::VectorXd inv_scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += G.values(i, j);
    if (!(s > 0.0))
      throw InvalidKernel("preconditioned_run: kernel sum at context point " + std::to_string(j) +
                          " is not positive");
    inv_scale[j] = 1.0 / s;
  }
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sq += k_x[i];
  if (!(sq > 0.0)) throw InvalidKernel("preconditioned_run: kernel sum at the query is not positive");
  return run(G, k_x, v, sigma2, schedule, L, &inv_scale, 1.0 / sq);
}

OptimalStep optimal_step(const SpectralSummary& s) {
  OptimalStep out;
  if (s.preconditioned)
    out.eta = 2.0 / (s.lambda_max + s.lambda_min);
  else
    out.eta = 2.0 / (s.lambda_max + s.lambda_min + 2.0 * s.sigma2);
  out.rho = 1.0 - 2.0 / (s.cond + 1.0);
  return out;
}

double contraction_factor(const SpectralSummary& s, double eta) {
  const double shift = s.preconditioned ? 0.0 : s.sigma2;
  return std::max(std::abs(1.0 - eta * (s.lambda_max + shift)),
                  std::abs(1.0 - eta * (s.lambda_min + shift)));
}

double predicted_error_bound(double rho, int L, const BoundNorms& norms) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidInput("contraction factor must lie in (0, 1), got " + std::to_string(rho));
  return std::exp(-(1.0 - rho) * L) * norms.kx_norm * norms.y_norm /
         (norms.lambda_min + norms.sigma2);
}

double predicted_context_bound(double rho, int L, const BoundNorms& norms) {
  if (!(rho > 0.0 && rho < 1.0))
    throw InvalidInput("contraction factor must lie in (0, 1), got " + std::to_string(rho));
  return std::exp(-(1.0 - rho) * L) * norms.lambda_max * norms.y_norm /
         (norms.lambda_min + norms.sigma2);
}

}  // namespace icgp
