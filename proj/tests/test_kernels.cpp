#include "icgp/errors.hpp"
#include "icgp/kernels.hpp"
#include "icgp/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace icgp;

TEST_CASE("gram of two identical points under rbf is all ones") {
  Eigen::MatrixXd X(2, 3);
  X << 0.3, -1.2, 0.5, 0.3, -1.2, 0.5;
  const GramMatrix G = gram(KernelSpec::rbf(1.0, 1.0), X);
  CHECK(G.values == Eigen::MatrixXd::Ones(2, 2));
}

TEST_CASE("linear gram of a single unit input") {
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  const GramMatrix G = gram(KernelSpec::linear(Eigen::VectorXd::Ones(1)), X);
  CHECK(G.n() == 1);
  CHECK(G.values(0, 0) == 1.0);
}

TEST_CASE("gram matches a per-entry loop for every kernel kind") {
  CounterRng rng(11, 0);
  const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, 8, 2, 1.0 / std::sqrt(2.0));
  Eigen::VectorXd ls(2);
  ls << 0.5, 1.7;
  for (const KernelSpec& spec : {KernelSpec::rbf(1.0, 0.8), KernelSpec::rbf(1.3, 0.4),
                                 KernelSpec::ard_rbf(0.9, ls), KernelSpec::linear(blr_covariance(2)),
                                 KernelSpec::linear(Eigen::VectorXd::Constant(1, 0.7))}) {
    const GramMatrix G = gram(spec, X);
    const Eigen::MatrixXd ref = oracle::gram(spec, X);
    CHECK((G.values - ref).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("gram is exactly symmetric with kernel diagonal") {
  CounterRng rng(12, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 30));
    const int d = 1 + static_cast<int>(rng.uniform_int(0, 5));
    const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, n, d, 1.0);
    for (const KernelSpec& spec : {KernelSpec::rbf(1.0 + rng.uniform(), 0.2 + rng.uniform()),
                                   KernelSpec::linear(blr_covariance(d))}) {
      const GramMatrix G = gram(spec, X);
      CHECK(G.values == G.values.transpose());
      for (int i = 0; i < n; ++i)
        CHECK(G.values(i, i) == spec(X.row(i).transpose(), X.row(i).transpose()));
    }
  }
}

TEST_CASE("unit-amplitude rbf entries lie in (0, 1] and row sums in [1, n]") {
  CounterRng rng(13, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 60));
    const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, n, 3, 1.0);
    const GramMatrix G = gram(KernelSpec::rbf(1.0, 0.3 + rng.uniform()), X);
    CHECK(G.values.minCoeff() > 0.0);
    CHECK(G.values.maxCoeff() <= 1.0);
    const Eigen::VectorXd s = G.values.rowwise().sum();
    CHECK(s.minCoeff() >= 1.0);
    CHECK(s.maxCoeff() <= n);
  }
}

TEST_CASE("gram rejects non-finite features") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
  X(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gram(KernelSpec::rbf(1.0, 1.0), X), InvalidInput);
  X(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gram(KernelSpec::rbf(1.0, 1.0), X), InvalidInput);
}

TEST_CASE("kernel parameters are validated") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(gram(KernelSpec::rbf(0.0, 1.0), X), InvalidKernel);
  CHECK_THROWS_AS(gram(KernelSpec::rbf(1.0, -1.0), X), InvalidKernel);
  CHECK_THROWS_AS(gram(KernelSpec::linear(Eigen::VectorXd::Ones(3)), X), InvalidKernel);
  CHECK_THROWS_AS(gram(KernelSpec::ard_rbf(1.0, Eigen::VectorXd::Ones(3)), X), InvalidKernel);
  CHECK_THROWS_AS(kernel_kind_from_string("matern"), InvalidKernel);
  CHECK(kernel_kind_from_string(to_string(KernelKind::ArdRbf)) == KernelKind::ArdRbf);
}

TEST_CASE("cross_vector examples") {
  Eigen::MatrixXd X(3, 2);
  X << 0.1, 0.2, -0.5, 0.4, 1.0, 1.0;
  const Eigen::VectorXd k = cross_vector(KernelSpec::rbf(1.0, 0.7), X, X.row(0).transpose());
  CHECK(k[0] == 1.0);

  Eigen::MatrixXd X1(1, 1);
  X1 << 1.0;
  Eigen::VectorXd x(1);
  x << 2.0;
  CHECK(cross_vector(KernelSpec::linear(Eigen::VectorXd::Ones(1)), X1, x)[0] == 2.0);

  CHECK_THROWS_AS(cross_vector(KernelSpec::rbf(1.0, 1.0), X, Eigen::VectorXd::Zero(3)),
                  InvalidInput);
}

TEST_CASE("cross_vector matches a per-entry loop") {
  CounterRng rng(14, 0);
  const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, 16, 3, 0.6);
  const Eigen::VectorXd x = oracle::gaussian_matrix(rng, 3, 1, 0.6);
  for (const KernelSpec& spec : {KernelSpec::rbf(1.0, 0.8), KernelSpec::linear(blr_covariance(3))}) {
    const Eigen::VectorXd k = cross_vector(spec, X, x);
    for (int i = 0; i < 16; ++i)
      CHECK(std::abs(k[i] - static_cast<double>(oracle::kernel(spec, X.row(i).transpose(), x))) <=
            1e-14);
  }
}

TEST_CASE("lifting ignores the extra coordinates") {
  CounterRng rng(15, 0);
  Eigen::VectorXd ls(2);
  ls << 0.5, 2.0;
  for (const KernelSpec& spec : {KernelSpec::rbf(1.0, 0.8), KernelSpec::ard_rbf(1.2, ls),
                                 KernelSpec::linear(blr_covariance(2))}) {
    const KernelSpec lifted = spec.lifted(2, 4);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(6), b = Eigen::VectorXd::Zero(6);
    a.head(2) = oracle::gaussian_matrix(rng, 2, 1, 1.0);
    b.head(2) = oracle::gaussian_matrix(rng, 2, 1, 1.0);
    const double base = spec(a.head(2), b.head(2));
    CHECK(lifted(a, b) == doctest::Approx(base).epsilon(1e-15));
    if (spec.kind == KernelKind::Linear) {
      a.tail(4) = oracle::gaussian_matrix(rng, 4, 1, 1.0);
      CHECK(lifted(a, b) == doctest::Approx(base).epsilon(1e-15));
    }
  }
}

TEST_CASE("spectral summary of a 1x1 system") {
  GramMatrix G{Eigen::MatrixXd::Ones(1, 1)};
  const SpectralSummary s = spectral_summary(G, 1.0, false);
  CHECK(s.lambda_max == 1.0);
  CHECK(s.lambda_min == 1.0);
  CHECK(s.step_bound == 1.0);
  CHECK(s.cond == 1.0);
  const SpectralSummary p = spectral_summary(G, 1.0, true);
  CHECK(p.cond == doctest::Approx(1.0));
}

TEST_CASE("spectral summary of two identical rbf points") {
  Eigen::MatrixXd X(2, 2);
  X << 0.4, -0.1, 0.4, -0.1;
  const SpectralSummary s = spectral_summary(gram(KernelSpec::rbf(1.0, 0.8), X), 0.2, false);
  CHECK(s.lambda_max == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(s.lambda_min) <= 1e-15);
  CHECK(s.cond == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(s.row_sums[0] == 2.0);
}

TEST_CASE("spectral summary input checks") {
  GramMatrix G{Eigen::MatrixXd::Ones(2, 2)};
  CHECK_THROWS_AS(spectral_summary(G, 0.0, false), InvalidInput);
  GramMatrix L{Eigen::MatrixXd::Identity(2, 2)};
  L.values(0, 1) = L.values(1, 0) = -0.5;
  CHECK_THROWS_AS(spectral_summary(L, 0.2, true), InvalidKernel);
  GramMatrix bad{Eigen::MatrixXd::Identity(2, 2)};
  bad.values(1, 1) = -1.0;
  CHECK_THROWS_AS(spectral_summary(bad, 0.2, false), NumericError);
}

TEST_CASE("eigenvalues agree with a Jacobi eigensolver") {
  CounterRng rng(16, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, 24, 2, 0.7);
    const GramMatrix G = gram(KernelSpec::rbf(1.0, 0.8), X);
    const auto [ref, vecs] = oracle::jacobi_eigen(G.values);
    const SpectralSummary s = spectral_summary(G, 0.2, false);
    CHECK(s.lambda_max == doctest::Approx(ref[23]).epsilon(1e-12));
    CHECK(std::abs(s.lambda_min - ref[0]) <= 1e-12 * ref[23]);

    // Preconditioned: eigenvalues of D^{-1}(G + sigma2 I) via the oracle on
    // the similar symmetric matrix assembled independently.
    const Eigen::VectorXd rs = oracle::gram(KernelSpec::rbf(1.0, 0.8), X).rowwise().sum();
    Eigen::MatrixXd A = oracle::gram(KernelSpec::rbf(1.0, 0.8), X);
    A.diagonal().array() += 0.2;
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j) A(i, j) /= std::sqrt(rs[i] * rs[j]);
    const auto [pref, pvecs] = oracle::jacobi_eigen(A);
    const SpectralSummary p = spectral_summary(G, 0.2, true);
    CHECK(p.lambda_max == doctest::Approx(pref[23]).epsilon(1e-12));
    CHECK(p.lambda_min == doctest::Approx(pref[0]).epsilon(1e-10));
    CHECK(p.cond == doctest::Approx(pref[23] / pref[0]).epsilon(1e-10));
    CHECK(p.step_bound == doctest::Approx(2.0 / pref[23]).epsilon(1e-12));
  }
}

TEST_CASE("preconditioned top eigenvalue lies in [1, 1 + sigma2]") {
  // D^{-1} G is row stochastic and s_i >= k(x_i, x_i) = amplitude^2, so the
  // ridge adds at most sigma2 / amplitude^2; unit amplitude gives 1 + sigma2.
  CounterRng rng(17, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 80));
    const int d = 1 + static_cast<int>(rng.uniform_int(0, 7));
    const double sigma2 = 0.01 + rng.uniform();
    Eigen::VectorXd ls(d);
    for (int k = 0; k < d; ++k) ls[k] = 0.2 + 2.0 * rng.uniform();
    const double amp = trial < 50 ? 1.0 : 0.5 + rng.uniform();
    const KernelSpec spec =
        trial % 2 ? KernelSpec::rbf(amp, ls[0]) : KernelSpec::ard_rbf(amp, ls);
    const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, n, d, 1.0 / std::sqrt(d));
    const SpectralSummary s = spectral_summary(gram(spec, X), sigma2, true);
    CHECK(s.lambda_max >= 1.0 - 1e-12);
    CHECK(s.lambda_max <= 1.0 + sigma2 / (amp * amp) + 1e-12);
    CHECK(s.cond >= 1.0);
  }
}

TEST_CASE("linear-kernel top eigenvalue concentrates in the finite-sample bracket") {
  // Mean of lambda_1 d / n over 20 seeds lies within
  // (1 +/- (sqrt(d/n) + t/sqrt(n)))^2 with t = 3.
  const int d = 16, n = 1000;
  double acc = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    CounterRng rng(1000 + seed, 0);
    const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, n, d, 1.0 / std::sqrt(d));
    acc += top_gram_eigenvalue(KernelSpec::linear(Eigen::VectorXd::Ones(1)), X) * d / n;
  }
  const double mean = acc / 20.0;
  const double dev = std::sqrt(double(d) / n) + 3.0 / std::sqrt(double(n));
  CHECK(mean >= (1.0 - dev) * (1.0 - dev));
  CHECK(mean <= (1.0 + dev) * (1.0 + dev));
}

TEST_CASE("fast top eigenvalue agrees with the dense solver") {
  CounterRng rng(18, 0);
  const Eigen::MatrixXd X = oracle::gaussian_matrix(rng, 120, 16, 0.25);
  for (const KernelSpec& spec :
       {KernelSpec::linear(blr_covariance(16)), KernelSpec::rbf(1.0, 0.8)}) {
    const double fast = top_gram_eigenvalue(spec, X);
    const double dense = spectral_summary(gram(spec, X), 0.2, false).lambda_max;
    CHECK(fast == doctest::Approx(dense).epsilon(1e-10));
  }
}

TEST_CASE("preconditioned condition number roughly doubles with n") {
  for (int n : {128, 256}) {
    double ratio = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      CounterRng rng(2000 + seed, 0);
      const Eigen::MatrixXd Xb = oracle::gaussian_matrix(rng, 2 * n, 8, 1.0 / std::sqrt(8.0));
      const KernelSpec spec = KernelSpec::rbf(1.0, 0.8);
      const double c1 = spectral_summary(gram(spec, Xb.topRows(n)), 0.2, true).cond;
      const double c2 = spectral_summary(gram(spec, Xb), 0.2, true).cond;
      ratio += c2 / c1 / 20.0;
    }
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.5);
  }
}
