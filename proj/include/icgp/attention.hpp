#pragma once

#include "icgp/kernels.hpp"
#include "icgp/richardson.hpp"
#include "icgp/types.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace icgp {

// Token layout, (d + 4) x (n + 1), one column per token, query last.
// Rows (0-based): [0, d) features, d label (1 in the query column),
// d+1 kernel row, d+2 mean state, d+3 variance state.
struct TokenLayout {
  Eigen::Index d = 0;

  Eigen::Index rows() const { return d + 4; }
  Eigen::Index label() const { return d; }
  Eigen::Index kernel_row() const { return d + 1; }
  Eigen::Index mean_row() const { return d + 2; }
  Eigen::Index var_row() const { return d + 3; }
};

Eigen::MatrixXd build_tokens(const ContextSet& ctx);

enum class MaskKind { FirstLayer, Context };

// (n+1) x (n+1) with entry (i, j) = 1 if token i is a key for column j.
// FirstLayer: only the query token; Context: only the n context tokens.
Eigen::MatrixXd attention_mask(MaskKind kind, Eigen::Index n);

struct LayerWeights {
  Eigen::MatrixXd V;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd S;
  MaskKind mask = MaskKind::Context;
};

struct TransformerConfig {
  int depth = 1;
  // One step size per iteration layer (depth - 1 of them when per-layer).
  StepSchedule schedule = StepSchedule::constant(1.0);
  // Step size of the noise drift term S; shares `schedule` when unset.
  std::optional<StepSchedule> drift_schedule;
  double sigma2 = 1.0;
  // Kernel on the d input features; it is lifted to the token dimension.
  KernelSpec kernel;
  Eigen::Index d = 1;
  bool normalized = false;

  // Throws InvalidInput / InvalidKernel on inconsistent settings.
  void validate() const;
  // 2 x (d + 4): mean = row d+2, var = sigma2 * label + row d+1 - row d+3.
  Eigen::MatrixXd readout() const;
};

std::vector<LayerWeights> construct_weights(const TransformerConfig& config);

// One layer's update of Z (attention plus skip term S Z):
//   delta_j = sum_i k(K z_i, Q z_j) M_ij V z_i + S z_j,
// with both terms divided by s_j = sum_i k(K z_i, Q z_j) M_ij when normalized.
// `score_kernel` acts on full tokens. Throws InvalidKernel if normalized and
// some s_j <= 0.
Eigen::MatrixXd attn(const Eigen::MatrixXd& Z, const LayerWeights& w, const Eigen::MatrixXd& mask,
                     const KernelSpec& score_kernel, bool normalized);

struct ForwardResult {
  // Z^(0..L); empty unless requested.
  std::vector<Eigen::MatrixXd> trace;
  // Readout of the query column after every layer, entries 0..L.
  std::vector<PPDMoments> layer_moments;
  PPDMoments moments;
  bool diverged = false;
  Eigen::MatrixXd final_tokens;
};

ForwardResult forward(const TransformerConfig& config, const Eigen::MatrixXd& Z0,
                      bool keep_trace = true);

}  // namespace icgp
