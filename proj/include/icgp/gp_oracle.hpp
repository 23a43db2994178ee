#pragma once

#include "icgp/kernels.hpp"
#include "icgp/ppd_head.hpp"
#include "icgp/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace icgp {

// Cholesky factor of G + sigma2 I. If the first attempt fails, 1e-10 * trace/n
// is added to the diagonal once; a second failure throws NumericError.
class RidgeFactor {
 public:
  RidgeFactor(const GramMatrix& G, double sigma2);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  double log_det() const;
  // L z for the lower Cholesky factor L; maps N(0, I) draws to N(0, G + sigma2 I).
  Eigen::VectorXd color(const Eigen::VectorXd& z) const;
  double jitter() const { return jitter_; }
  Eigen::Index n() const { return llt_.rows(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

struct MomentDiagnostics {
  double jitter = 0.0;
  bool var_clamped = false;
};

// mean = k_x^T (G + sigma2 I)^{-1} Y, var = k(x,x) + sigma2 - k_x^T (G + sigma2 I)^{-1} k_x.
PPDMoments exact_moments(const KernelSpec& spec, double sigma2, const ContextSet& ctx,
                         MomentDiagnostics* diag = nullptr);

// Same, reusing a factorization of the context Gram matrix.
PPDMoments exact_moments(const KernelSpec& spec, double sigma2, const ContextSet& ctx,
                         const RidgeFactor& factor, MomentDiagnostics* diag = nullptr);

double log_marginal_likelihood(const KernelSpec& spec, double sigma2, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& Y);

// Discrete prior over RBF hyperparameters (lengthscale, noise standard deviation).
struct HyperComponent {
  double lengthscale = 1.0;
  double noise_sd = 0.1;
  double weight = 1.0;
};

struct HyperPrior {
  double amplitude = 1.0;
  std::vector<HyperComponent> components;

  // {0.4, 0.8, 1.2} x {0.1, 0.2, 0.3} with uniform weights.
  static HyperPrior default_grid();
  void validate() const;

  KernelSpec kernel(std::size_t h) const;
  double sigma2(std::size_t h) const;
};

// Posterior weights proportional to prior weight times marginal likelihood,
// each component carrying its own exact moments.
MixturePPD hierarchical_mixture(const HyperPrior& prior, const ContextSet& ctx);

// Gaussian (or Gaussian mixture) mass per bin, renormalized by the mass on
// (a, b]. Throws InvalidPartition if that mass is below 1e-12.
BinnedDistribution reference_binned(const PPDMoments& ppd, const Partition& partition);
BinnedDistribution reference_binned(const MixturePPD& ppd, const Partition& partition);

// Mass of the (mixture) PPD outside (a, b].
double tail_mass(const MixturePPD& ppd, double a, double b);

// First and second raw moments of the (mixture) PPD conditioned on (a, b].
// Throws InvalidPartition if (a, b] carries no mass.
struct TruncatedMoments {
  double m1 = 0.0;
  double m2 = 0.0;
};
TruncatedMoments truncated_moments(const MixturePPD& ppd, double a, double b);

struct HyperCandidate {
  KernelSpec kernel;
  double sigma2 = 1.0;
};

// Grid point with the largest log marginal likelihood; ties go to the first.
HyperCandidate empirical_bayes_fit(const std::vector<HyperCandidate>& grid,
                                   const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                   std::vector<double>* scores = nullptr);

}  // namespace icgp
