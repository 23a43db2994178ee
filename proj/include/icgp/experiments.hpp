#pragma once

#include "icgp/config.hpp"
#include "icgp/datagen.hpp"
#include "icgp/result_table.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace icgp {

struct ExperimentOutput {
  ResultTable table;
  // (file name, contents) pairs written next to results.csv.
  std::vector<std::pair<std::string, std::string>> files;
  // Human-readable lines printed by the CLI.
  std::vector<std::string> notes;
};

// depth-bins, normalization, generalization, stepsize, spectra, calibrate,
// fit-eb.
const std::vector<std::string>& experiment_names();

// Every key an experiment reads, with its default value.
Config experiment_defaults(const std::string& name);

// Adds defaults for `name` and rejects unknown keys (ConfigError). The
// result is what gets hashed and written to the manifest.
Config resolve_config(const std::string& name, Config cfg);
// Same, taking the experiment name from the "experiment" key.
Config resolve_config(Config cfg);

// Sweep grid summary for --dry-run.
std::string describe_grid(const Config& resolved);

// Runs the experiment named in `resolved`. Results do not depend on
// `threads`.
ExperimentOutput run_experiment(const Config& resolved, int threads);

// Creates `dir` and writes results.csv, manifest.txt and the output files.
// Throws IoError.
void write_outputs(const std::string& dir, const Config& resolved, const ExperimentOutput& out);

std::string manifest_text(const Config& resolved);

// Calls body(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by any call is rethrown after all workers stop.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

// Lower-level pieces shared with the tests.

PriorConfig prior_from_config(const Config& resolved);
// Kernel named by the kernel / amplitude / lengthscale / linear_cov keys.
KernelSpec kernel_from_config(const Config& resolved);
// "auto" calibrates on the prior; otherwise the "a,b" pair given.
Truncation truncation_from_config(const Config& resolved, const PriorConfig& prior);

// Plain attention: scale * 2 / (mean lambda_1(G) + sigma2), the top Gram
// eigenvalue averaged over `draws` input sets of size n. Normalized attention:
// scale * 2 / (1 + sigma2 / amplitude^2), the bound on lambda_1(D^-1 (G + sigma2 I))
// that holds at every n (zero for the linear kernel).
struct TunedSteps {
  double plain = 0.0;
  double normalized = 0.0;
};
TunedSteps tune_steps(const PriorConfig& prior, int n, int draws, double scale, std::uint64_t seed);

struct NormalizationSample {
  bool normalized = false;
  int n_eval = 0;
  int replicate = 0;
  double tv = 0.0;
  bool diverged = false;
};
struct NormalizationRun {
  TunedSteps steps;
  Truncation truncation;
  std::vector<NormalizationSample> samples;
};
NormalizationRun normalization_samples(const Config& resolved, int threads);

// Stream index of replicate r at evaluation size n.
inline std::uint64_t eval_stream(int n, int r) {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint32_t>(r);
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace icgp
