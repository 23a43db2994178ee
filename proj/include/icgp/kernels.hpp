#pragma once

#include <Eigen/Dense>

#include <string>

namespace icgp {

enum class KernelKind { Linear, Rbf, ArdRbf };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

// Covariance function of the GP prior (and the attention score kernel).
//
//   linear:  k(x, x') = x^T diag(linear_cov) x'
//   rbf:     k(x, x') = amplitude^2 exp(-|x - x'|^2 / (2 l^2))
//   ard_rbf: k(x, x') = amplitude^2 exp(-0.5 sum_k (x_k - x'_k)^2 / l_k^2)
//
// A linear covariance of length 1 is broadcast over every dimension.
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double amplitude = 1.0;
  Eigen::VectorXd lengthscales = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd linear_cov = Eigen::VectorXd::Ones(1);

  static KernelSpec linear(Eigen::VectorXd diag_cov);
  static KernelSpec rbf(double amplitude, double lengthscale);
  static KernelSpec ard_rbf(double amplitude, Eigen::VectorXd lengthscales);

  // Throws InvalidKernel when a scale parameter is non-positive or the
  // per-dimension vectors do not fit dimension `d`.
  void validate(Eigen::Index d) const;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const;

  // Same kernel on (d + extra)-dimensional inputs whose trailing `extra`
  // coordinates do not contribute (used for attention scores on tokens).
  KernelSpec lifted(Eigen::Index d, Eigen::Index extra) const;

  // Strictly positive everywhere (RBF family).
  bool strictly_positive() const { return kind != KernelKind::Linear; }
};

// Default Bayesian linear regression covariance: 2.0 on the first
// floor(d/3) coordinates, 1.0 up to floor(2d/3), 0.4 on the rest.
Eigen::VectorXd blr_covariance(Eigen::Index d);

struct GramMatrix {
  Eigen::MatrixXd values;
  Eigen::Index n() const { return values.rows(); }
};

// Rows of `X` are inputs. The matrix is filled from one evaluation per
// unordered pair, so it is exactly symmetric.
GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& X);

Eigen::VectorXd cross_vector(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

struct SpectralSummary {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double cond = 1.0;
  Eigen::VectorXd row_sums;
  double step_bound = 0.0;
  double sigma2 = 0.0;
  bool preconditioned = false;
};

// Spectrum of G (plain) or of D^{-1}(G + sigma2 I) (preconditioned, via the
// similar symmetric matrix D^{-1/2}(G + sigma2 I)D^{-1/2}).
//
// In plain mode lambda_max/lambda_min are eigenvalues of G itself and
// cond = (lambda_max + sigma2)/(lambda_min + sigma2). In preconditioned mode
// they are eigenvalues of the preconditioned ridge system and
// cond = lambda_max / lambda_min.
SpectralSummary spectral_summary(const GramMatrix& G, double sigma2,
                                 bool preconditioned);

// Ascending eigenvalues of a symmetric matrix. Throws NumericError if the
// eigensolver does not converge.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& M);

// Largest eigenvalue of the Gram matrix of `X` without a full dense solve:
// the d x d dual Gram for the linear kernel, power iteration otherwise
// (falls back to the dense solver if the iteration stalls).
double top_gram_eigenvalue(const KernelSpec& spec, const Eigen::MatrixXd& X);

}  // namespace icgp
