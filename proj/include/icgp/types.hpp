#pragma once

#include <Eigen/Dense>

#include <vector>

namespace icgp {

// A regression context (X, Y) plus one query input. Rows of X are inputs.
struct ContextSet {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  Eigen::VectorXd x_query;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  // Throws InvalidInput unless n >= 1, shapes agree and every entry is finite.
  void validate() const;
};

// Predictive mean and variance (variance includes the observation noise).
struct PPDMoments {
  double mean = 0.0;
  double var = 1.0;
};

struct MixtureComponent {
  double weight = 1.0;
  PPDMoments moments;
};

// Finite Gaussian mixture; a single exact PPD is the one-component case.
struct MixturePPD {
  std::vector<MixtureComponent> components;

  static MixturePPD single(const PPDMoments& m) { return MixturePPD{{{1.0, m}}}; }
  double mean() const;
  double second_moment() const;
};

}  // namespace icgp
