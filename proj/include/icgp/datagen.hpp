#pragma once

#include "icgp/gp_oracle.hpp"
#include "icgp/kernels.hpp"
#include "icgp/rng.hpp"
#include "icgp/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace icgp {

enum class InputLaw { Gaussian, Uniform };

std::string to_string(InputLaw law);
InputLaw input_law_from_string(const std::string& name);

// Generative prior for synthetic tasks. Inputs are N(0, I/d) (Gaussian) or
// Unif[-1/sqrt(d), 1/sqrt(d)]^d (Uniform); the query follows the same law.
// With a hyperprior, each task first draws an RBF (lengthscale, noise) pair
// and `kernel` / `sigma2` are ignored.
struct PriorConfig {
  KernelSpec kernel = KernelSpec::rbf(1.0, 0.8);
  double sigma2 = 0.2;
  int d = 2;
  int n_min = 1;
  int n_max = 1;
  InputLaw law = InputLaw::Gaussian;
  std::optional<HyperPrior> hyper;

  void validate() const;
};

struct SyntheticInstance {
  ContextSet ctx;
  // Kernel and noise that generated this task.
  KernelSpec kernel;
  double sigma2 = 0.0;
  int hyper_index = -1;
  // Exact PPD under the generating hyperparameters.
  PPDMoments moments;
  // Posterior mixture over the hyperprior (hierarchical priors only).
  std::optional<MixturePPD> mixture;
  double y = 0.0;
  double a = 0.0;
  double b = 0.0;

  // The Bayes-optimal predictive the evaluation compares against.
  MixturePPD true_ppd() const { return mixture ? *mixture : MixturePPD::single(moments); }
};

Eigen::MatrixXd sample_inputs(InputLaw law, int n, int d, CounterRng& rng);

// N(mean, var) conditioned on (a, b], by inverting the CDF on the side of the
// smaller tail. Throws InvalidPartition if (a, b] carries no representable mass.
double sample_truncated_normal(double mean, double var, double a, double b, CounterRng& rng);

// Draws n ~ Unif{n_min..n_max}, inputs, labels Y ~ N(0, G + sigma2 I), a
// query, its exact moments and a label y truncated to (a, b].
SyntheticInstance sample_instance(const PriorConfig& prior, double a, double b,
                                  std::uint64_t seed, std::uint64_t stream);

// Same with a fixed context size.
SyntheticInstance sample_instance_n(const PriorConfig& prior, int n, double a, double b,
                                    std::uint64_t seed, std::uint64_t stream);

struct Truncation {
  double a = 0.0;
  double b = 0.0;
};

// Empirical tail_mass/2 and 1 - tail_mass/2 quantiles of y over mc_count
// draws of (task, y) from the prior (y untruncated).
Truncation calibrate_truncation(const PriorConfig& prior, int mc_count, double tail_mass,
                                std::uint64_t seed);

// Per-column affine standardization of a tabular dataset.
struct TransformRecord {
  std::vector<std::string> feature_names;
  std::vector<double> feature_center;
  std::vector<double> feature_scale;
  double coord_scale = 1.0;
  std::string response_name;
  double response_center = 0.0;
  double response_scale = 1.0;

  Eigen::MatrixXd forward_features(const Eigen::MatrixXd& raw) const;
  Eigen::VectorXd forward_response(const Eigen::VectorXd& raw) const;
  Eigen::VectorXd inverse_response(const Eigen::VectorXd& standardized) const;
  // Variances scale by response_scale^2.
  double inverse_variance(double standardized_var) const;

  // key=value lines, numbers in shortest round-trip form.
  std::string to_text() const;
  void save(const std::string& path) const;
  static TransformRecord load(const std::string& path);
};

struct StandardizedData {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  TransformRecord transform;
};

// Reads a delimited file with a header row. Features are centered, divided by
// their sample standard deviation and then by coord_scale; the response is
// centered and scaled by its own standard deviation.
StandardizedData load_standardized_csv(const std::string& path,
                                       const std::vector<std::string>& feature_columns,
                                       const std::string& response_column, double coord_scale,
                                       char delimiter = ',');

}  // namespace icgp
