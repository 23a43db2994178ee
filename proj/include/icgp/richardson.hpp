#pragma once

#include "icgp/kernels.hpp"

#include <Eigen/Dense>

#include <vector>

namespace icgp {

struct StepSchedule {
  enum class Mode { Constant, PerLayer };

  Mode mode = Mode::Constant;
  std::vector<double> eta{1.0};

  static StepSchedule constant(double eta);
  static StepSchedule per_layer(std::vector<double> etas);

  // Step used by iteration l (0-based).
  double at(int l) const { return mode == Mode::Constant ? eta.front() : eta.at(l); }

  // Throws InvalidInput unless every step is finite and >= 0 and a per-layer
  // schedule has exactly `steps` entries.
  void validate(int steps) const;
};

// States u^(0..L) of one right-hand side v at the context points and the query.
struct SolverTrajectory {
  std::vector<Eigen::VectorXd> context;
  std::vector<double> query;
  bool diverged = false;

  int iterations() const { return static_cast<int>(query.size()) - 1; }
};

// Richardson iteration for (G + sigma2 I) c = v, tracked through
// u(x_j) = sum_i k(x_i, x_j) c_i and u(x) = k_x^T c:
//   u(x_j) <- (1 - eta sigma2) u(x_j) + eta sum_i k(x_i, x_j) (v_i - u(x_i)).
// The trajectory is marked diverged once any state exceeds 1e12 in magnitude
// or becomes non-finite; the iteration is not stopped.
SolverTrajectory richardson_run(const GramMatrix& G, const Eigen::VectorXd& k_x,
                                const Eigen::VectorXd& v, double sigma2,
                                const StepSchedule& schedule, int L);

// Jacobi-preconditioned variant: point j (and the query) uses eta / s_j with
// s_j the kernel sum over the n context keys. Throws InvalidKernel if any
// such sum is not positive.
SolverTrajectory preconditioned_run(const GramMatrix& G, const Eigen::VectorXd& k_x,
                                    const Eigen::VectorXd& v, double sigma2,
                                    const StepSchedule& schedule, int L);

struct OptimalStep {
  double eta = 0.0;
  double rho = 0.0;
};

// eta* = 2 / (lambda_max + lambda_min + 2 sigma2) and rho* = 1 - 2 / (cond + 1);
// for a preconditioned summary eta* = 2 / (lambda_max + lambda_min).
OptimalStep optimal_step(const SpectralSummary& summary);

// Contraction factor max |1 - eta lambda| of the ridge system at step eta.
double contraction_factor(const SpectralSummary& summary, double eta);

struct BoundNorms {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double sigma2 = 0.0;
  double y_norm = 0.0;
  double kx_norm = 0.0;
};

// exp(-(1 - rho) L) * |k_x|_2 |Y|_2 / (lambda_min + sigma2): bound on the
// query-point error after L iterations. Throws InvalidInput unless 0 < rho < 1.
double predicted_error_bound(double rho, int L, const BoundNorms& norms);

// Bound on the context-point error |u^(L)(X) - u*(X)|_2 after L iterations,
// using lambda_max / (lambda_min + sigma2) in place of |k_x|_2.
double predicted_context_bound(double rho, int L, const BoundNorms& norms);

}  // namespace icgp
