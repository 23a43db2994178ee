#pragma once

// Independent reference computations used only by the tests. They avoid the
// library's code paths on purpose: plain loops in long double, a cyclic
// Jacobi eigensolver instead of Householder + QR, explicit inverses instead
// of Cholesky solves, and adaptive quadrature instead of CDF differences.

#include "icgp/kernels.hpp"
#include "icgp/ppd_head.hpp"
#include "icgp/rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline long double kernel(const icgp::KernelSpec& s, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) {
  long double acc = 0.0L;
  switch (s.kind) {
    case icgp::KernelKind::Linear:
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const long double c = s.linear_cov.size() == 1 ? s.linear_cov[0] : s.linear_cov[k];
        acc += static_cast<long double>(a[k]) * c * b[k];
      }
      return acc;
    case icgp::KernelKind::Rbf:
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const long double diff = static_cast<long double>(a[k]) - b[k];
        acc += diff * diff;
      }
      return static_cast<long double>(s.amplitude) * s.amplitude *
             std::exp(-acc / (2.0L * s.lengthscales[0] * s.lengthscales[0]));
    case icgp::KernelKind::ArdRbf:
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const long double diff = (static_cast<long double>(a[k]) - b[k]) / s.lengthscales[k];
        acc += diff * diff;
      }
      return static_cast<long double>(s.amplitude) * s.amplitude * std::exp(-acc / 2.0L);
  }
  return 0.0L;
}

inline Eigen::MatrixXd gram(const icgp::KernelSpec& s, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd G(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j)
      G(i, j) = static_cast<double>(kernel(s, X.row(i).transpose(), X.row(j).transpose()));
  return G;
}

// Cyclic Jacobi rotations in long double. Returns (eigenvalues ascending,
// eigenvectors as columns).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(const Eigen::MatrixXd& M) {
  using LD = long double;
  const Eigen::Index n = M.rows();
  std::vector<std::vector<LD>> A(n, std::vector<LD>(n));
  std::vector<std::vector<LD>> V(n, std::vector<LD>(n, 0.0L));
  for (Eigen::Index i = 0; i < n; ++i) {
    V[i][i] = 1.0L;
    for (Eigen::Index j = 0; j < n; ++j) A[i][j] = 0.5L * (M(i, j) + M(j, i));
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    LD off = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += A[i][j] * A[i][j];
    if (off < 1e-36L) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (A[p][q] == 0.0L) continue;
        const LD theta = (A[q][q] - A[p][p]) / (2.0L * A[p][q]);
        const LD t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const LD c = 1.0L / std::sqrt(t * t + 1.0L);
        const LD s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const LD akp = A[k][p], akq = A[k][q];
          A[k][p] = c * akp - s * akq;
          A[k][q] = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const LD apk = A[p][k], aqk = A[q][k];
          A[p][k] = c * apk - s * aqk;
          A[q][k] = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const LD vkp = V[k][p], vkq = V[k][q];
          V[k][p] = c * vkp - s * vkq;
          V[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return A[x][x] < A[y][y]; });
  Eigen::VectorXd vals(n);
  Eigen::MatrixXd vecs(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    vals[c] = static_cast<double>(A[order[c]][order[c]]);
    for (Eigen::Index k = 0; k < n; ++k) vecs(k, c) = static_cast<double>(V[k][order[c]]);
  }
  return {vals, vecs};
}

// (G + sigma2 I)^{-1} assembled from the Jacobi eigendecomposition.
inline Eigen::MatrixXd ridge_inverse(const Eigen::MatrixXd& G, double sigma2) {
  const auto [vals, vecs] = jacobi_eigen(G);
  const Eigen::VectorXd inv = (vals.array() + sigma2).inverse();
  return vecs * inv.asDiagonal() * vecs.transpose();
}

inline double ridge_log_det(const Eigen::MatrixXd& G, double sigma2) {
  const auto [vals, vecs] = jacobi_eigen(G);
  return (vals.array() + sigma2).log().sum();
}

template <class F>
double integrate(F f, double lo, double hi, double tol = 1e-14, unsigned depth = 15) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, depth, tol, &err);
}

inline double normal_pdf(double t, double mean, double var) {
  return std::exp(-0.5 * (t - mean) * (t - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Binned CDF evaluated by walking the bins.
inline double binned_cdf(const icgp::BinnedDistribution& p, double t) {
  const icgp::Partition& part = p.partition;
  if (t <= part.a) return 0.0;
  if (t >= part.b) return 1.0;
  double cum = 0.0;
  for (int c = 0; c < part.C; ++c) {
    const double lo = part.a + c * (part.b - part.a) / part.C;
    const double hi = part.a + (c + 1) * (part.b - part.a) / part.C;
    if (t < hi) return cum + p.probs[c] * (t - lo) / (hi - lo);
    cum += p.probs[c];
  }
  return 1.0;
}

inline double crps_quadrature(const icgp::BinnedDistribution& p, double y) {
  auto f = [&](double t) {
    const double step = t >= y ? 1.0 : 0.0;
    const double g = binned_cdf(p, t) - step;
    return g * g;
  };
  const icgp::Partition& part = p.partition;
  double acc = 0.0;
  if (y < part.a) acc += part.a - y;
  if (y > part.b) acc += y - part.b;
  for (int c = 0; c < part.C; ++c) {
    const double lo = part.a + c * (part.b - part.a) / part.C;
    const double hi = part.a + (c + 1) * (part.b - part.a) / part.C;
    if (y > lo && y < hi) {
      acc += integrate(f, lo, y, 1e-12, 3) + integrate(f, y, hi, 1e-12, 3);
    } else {
      acc += integrate(f, lo, hi, 1e-12, 3);
    }
  }
  return acc;
}

// Fills a matrix with independent N(0, scale^2) entries.
inline Eigen::MatrixXd gaussian_matrix(icgp::CounterRng& rng, Eigen::Index rows, Eigen::Index cols,
                                       double scale) {
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = scale * rng.normal();
  return M;
}

}  // namespace oracle
