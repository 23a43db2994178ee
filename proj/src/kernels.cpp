#include "icgp/kernels.hpp"

#include "icgp/errors.hpp"

#include <cmath>
#include <sstream>

namespace icgp {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear:
      return "linear";
    case KernelKind::Rbf:
      return "rbf";
    case KernelKind::ArdRbf:
      return "ard_rbf";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "linear") return KernelKind::Linear;
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "ard_rbf") return KernelKind::ArdRbf;
  throw InvalidKernel("unknown kernel kind '" + name + "'");
}

KernelSpec KernelSpec::linear(Eigen::VectorXd diag_cov) {
  KernelSpec s;
  s.kind = KernelKind::Linear;
  s.linear_cov = std::move(diag_cov);
  return s;
}

KernelSpec KernelSpec::rbf(double amplitude, double lengthscale) {
  KernelSpec s;
  s.kind = KernelKind::Rbf;
  s.amplitude = amplitude;
  s.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  return s;
}

KernelSpec KernelSpec::ard_rbf(double amplitude, Eigen::VectorXd lengthscales) {
  KernelSpec s;
  s.kind = KernelKind::ArdRbf;
  s.amplitude = amplitude;
  s.lengthscales = std::move(lengthscales);
  return s;
}

void KernelSpec::validate(Eigen::Index d) const {
  auto all_positive = [](const Eigen::VectorXd& v) {
    return v.size() > 0 && v.allFinite() && (v.array() > 0.0).all();
  };
  switch (kind) {
    case KernelKind::Linear:
      if (!all_positive(linear_cov))
        throw InvalidKernel("linear covariance must be positive and finite");
      if (linear_cov.size() != 1 && linear_cov.size() != d)
        throw InvalidKernel("linear covariance has " + std::to_string(linear_cov.size()) +
                            " entries for dimension " + std::to_string(d));
      break;
    case KernelKind::Rbf:
      if (!(amplitude > 0.0) || !std::isfinite(amplitude))
        throw InvalidKernel("rbf amplitude must be positive");
      if (lengthscales.size() != 1 || !all_positive(lengthscales))
        throw InvalidKernel("rbf needs one positive lengthscale");
      break;
    case KernelKind::ArdRbf:
      if (!(amplitude > 0.0) || !std::isfinite(amplitude))
        throw InvalidKernel("ard_rbf amplitude must be positive");
      if (!all_positive(lengthscales))
        throw InvalidKernel("ard_rbf lengthscales must be positive");
      if (lengthscales.size() != d)
        throw InvalidKernel("ard_rbf has " + std::to_string(lengthscales.size()) +
                            " lengthscales for dimension " + std::to_string(d));
      break;
  }
}

double KernelSpec::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) const {
  const Eigen::Index d = a.size();
  switch (kind) {
    case KernelKind::Linear: {
      double acc = 0.0;
      if (linear_cov.size() == 1) {
        for (Eigen::Index k = 0; k < d; ++k) acc += a[k] * b[k];
        return acc * linear_cov[0];
      }
      for (Eigen::Index k = 0; k < d; ++k) acc += a[k] * linear_cov[k] * b[k];
      return acc;
    }
    case KernelKind::Rbf: {
      double sq = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        sq += diff * diff;
      }
      const double l = lengthscales[0];
      return amplitude * amplitude * std::exp(-0.5 * sq / (l * l));
    }
    case KernelKind::ArdRbf: {
      double sq = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = (a[k] - b[k]) / lengthscales[k];
        sq += diff * diff;
      }
      return amplitude * amplitude * std::exp(-0.5 * sq);
    }
  }
  return 0.0;
}

KernelSpec KernelSpec::lifted(Eigen::Index d, Eigen::Index extra) const {
  KernelSpec out = *this;
  if (kind == KernelKind::Linear) {
    Eigen::VectorXd cov = Eigen::VectorXd::Zero(d + extra);
    cov.head(d) = linear_cov.size() == 1 ? Eigen::VectorXd::Constant(d, linear_cov[0])
                                         : linear_cov;
    out.linear_cov = cov;
  } else if (kind == KernelKind::ArdRbf) {
    Eigen::VectorXd ls = Eigen::VectorXd::Ones(d + extra);
    ls.head(d) = lengthscales;
    out.lengthscales = ls;
  }
  return out;
}

Eigen::VectorXd blr_covariance(Eigen::Index d) {
  Eigen::VectorXd s(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (k < d / 3)
      s[k] = 2.0;
    else if (k < 2 * d / 3)
      s[k] = 1.0;
    else
      s[k] = 0.4;
  }
  return s;
}

GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 1) throw InvalidInput("gram: need at least one input");
  if (!X.allFinite()) throw InvalidInput("gram: non-finite feature entries");
  spec.validate(X.cols());
  GramMatrix G;
  G.values.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = spec(X.row(i).transpose(), X.row(j).transpose());
      G.values(i, j) = v;
      G.values(j, i) = v;
    }
  }
  return G;
}

Eigen::VectorXd cross_vector(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (X.cols() != x.size())
    throw InvalidInput("cross_vector: query has dimension " + std::to_string(x.size()) +
                       ", inputs have " + std::to_string(X.cols()));
  if (!X.allFinite() || !x.allFinite())
    throw InvalidInput("cross_vector: non-finite feature entries");
  spec.validate(X.cols());
  Eigen::VectorXd k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) k[i] = spec(X.row(i).transpose(), x);
  return k;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "symmetric eigensolver did not converge (n=" << M.rows()
        << ", max|a_ij|=" << M.cwiseAbs().maxCoeff()
        << ", asymmetry=" << (M - M.transpose()).cwiseAbs().maxCoeff() << ")";
    throw NumericError(msg.str());
  }
  return solver.eigenvalues();
}

SpectralSummary spectral_summary(const GramMatrix& G, double sigma2, bool preconditioned) {
  if (!(sigma2 > 0.0)) throw InvalidInput("spectral_summary: sigma2 must be positive");
  const Eigen::Index n = G.n();
  if (n < 1) throw InvalidInput("spectral_summary: empty Gram matrix");

  SpectralSummary s;
  s.sigma2 = sigma2;
  s.preconditioned = preconditioned;
  s.row_sums = G.values.rowwise().sum();

  if (!preconditioned) {
    const Eigen::VectorXd ev = symmetric_eigenvalues(G.values);
    s.lambda_max = ev[n - 1];
    s.lambda_min = ev[0];
    if (s.lambda_min < -1e-8 * std::abs(s.lambda_max)) {
      std::ostringstream msg;
      msg << "Gram matrix is not PSD: lambda_min=" << s.lambda_min
          << ", lambda_max=" << s.lambda_max;
      throw NumericError(msg.str());
    }
    s.cond = (s.lambda_max + sigma2) / (s.lambda_min + sigma2);
    s.step_bound = 2.0 / (s.lambda_max + sigma2);
    return s;
  }

  if ((G.values.array() <= 0.0).any())
    throw InvalidKernel("preconditioned spectrum needs a strictly positive kernel");
  const Eigen::VectorXd inv_sqrt = s.row_sums.array().rsqrt();
  Eigen::MatrixXd A = G.values;
  A.diagonal().array() += sigma2;
  A = inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
  A = 0.5 * (A + A.transpose());
  const Eigen::VectorXd ev = symmetric_eigenvalues(A);
  s.lambda_max = ev[n - 1];
  s.lambda_min = ev[0];
  if (!(s.lambda_min > 0.0)) {
    std::ostringstream msg;
    msg << "preconditioned ridge system is not positive definite: lambda_min=" << s.lambda_min;
    throw NumericError(msg.str());
  }
  s.cond = s.lambda_max / s.lambda_min;
  s.step_bound = 2.0 / s.lambda_max;
  return s;
}

double top_gram_eigenvalue(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  spec.validate(X.cols());
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (spec.kind == KernelKind::Linear && n > d) {
    // X diag(c) X^T and diag(c)^{1/2} X^T X diag(c)^{1/2} share their nonzero spectrum.
    const Eigen::VectorXd c = spec.linear_cov.size() == 1
                                  ? Eigen::VectorXd::Constant(d, spec.linear_cov[0])
                                  : spec.linear_cov;
    const Eigen::MatrixXd Xs = X * c.array().sqrt().matrix().asDiagonal();
    const Eigen::MatrixXd dual = Xs.transpose() * Xs;
    return symmetric_eigenvalues(dual)[d - 1];
  }

  const GramMatrix G = gram(spec, X);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double lambda = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd w = G.values * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (!(norm > 0.0)) break;
    v = w / norm;
    if (it > 2 && std::abs(next - lambda) <= 1e-13 * std::abs(next)) return next;
    lambda = next;
  }
  return symmetric_eigenvalues(G.values)[n - 1];
}

}  // namespace icgp
