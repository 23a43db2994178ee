#include "icgp/attention.hpp"

#include "icgp/errors.hpp"

#include <cmath>

namespace icgp {

Eigen::MatrixXd build_tokens(const ContextSet& ctx) {
  ctx.validate();
  const Eigen::Index n = ctx.n();
  const TokenLayout lay{ctx.d()};
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(lay.rows(), n + 1);
  Z.topLeftCorner(lay.d, n) = ctx.X.transpose();
  Z.block(0, n, lay.d, 1) = ctx.x_query;
  Z.block(lay.label(), 0, 1, n) = ctx.Y.transpose();
  Z(lay.label(), n) = 1.0;
  return Z;
}

Eigen::MatrixXd attention_mask(MaskKind kind, Eigen::Index n) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
  if (kind == MaskKind::FirstLayer)
    M.row(n).setOnes();
  else
    M.topRows(n).setOnes();
  return M;
}

void TransformerConfig::validate() const {
  if (depth < 1) throw InvalidInput("transformer depth must be at least 1");
  if (d < 1) throw InvalidInput("transformer input dimension must be at least 1");
  if (!(sigma2 > 0.0)) throw InvalidInput("noise variance must be positive");
  kernel.validate(d);
  schedule.validate(depth - 1);
  if (drift_schedule) drift_schedule->validate(depth - 1);
  if (normalized && !kernel.strictly_positive())
    throw InvalidKernel("normalized attention needs a strictly positive score kernel");
}

Eigen::MatrixXd TransformerConfig::readout() const {
  const TokenLayout lay{d};
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, lay.rows());
  W(0, lay.mean_row()) = 1.0;
  W(1, lay.label()) = sigma2;
  W(1, lay.kernel_row()) = 1.0;
  W(1, lay.var_row()) = -1.0;
  return W;
}

std::vector<LayerWeights> construct_weights(const TransformerConfig& config) {
  config.validate();
  const TokenLayout lay{config.d};
  const Eigen::Index D = lay.rows();

  Eigen::MatrixXd KQ = Eigen::MatrixXd::Zero(D, D);
  KQ.topLeftCorner(lay.d, lay.d).setIdentity();

  std::vector<LayerWeights> layers;
  layers.reserve(config.depth);

  LayerWeights first{Eigen::MatrixXd::Zero(D, D), KQ, KQ, Eigen::MatrixXd::Zero(D, D),
                     MaskKind::FirstLayer};
  first.V(lay.kernel_row(), lay.label()) = 1.0;
  layers.push_back(std::move(first));

  for (int l = 1; l < config.depth; ++l) {
    const double eta = config.schedule.at(l - 1);
    const double drift = config.drift_schedule ? config.drift_schedule->at(l - 1) : eta;
    LayerWeights w{Eigen::MatrixXd::Zero(D, D), KQ, KQ, Eigen::MatrixXd::Zero(D, D),
                   MaskKind::Context};
    w.V(lay.mean_row(), lay.label()) = eta;
    w.V(lay.var_row(), lay.kernel_row()) = eta;
    w.V(lay.mean_row(), lay.mean_row()) = -eta;
    w.V(lay.var_row(), lay.var_row()) = -eta;
    w.S(lay.mean_row(), lay.mean_row()) = -drift * config.sigma2;
    w.S(lay.var_row(), lay.var_row()) = -drift * config.sigma2;
    layers.push_back(std::move(w));
  }
  return layers;
}

namespace {

// Masked scores, stored transposed: T(j, i) = k(K z_i, Q z_j) M_ij, so that
// column i (key i) is contiguous over queries j.
Eigen::MatrixXd masked_scores_t(const Eigen::MatrixXd& KZ, const Eigen::MatrixXd& QZ,
                                const Eigen::MatrixXd& mask, const KernelSpec& kernel) {
  const Eigen::Index N = KZ.cols();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j)
      if (mask(i, j) != 0.0) T(j, i) = kernel(KZ.col(i), QZ.col(j)) * mask(i, j);
  return T;
}

Eigen::MatrixXd apply_layer(const Eigen::MatrixXd& Z, const LayerWeights& w,
                            const Eigen::MatrixXd& scores_t, bool normalized) {
  const Eigen::Index D = Z.rows();
  const Eigen::Index N = Z.cols();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(D, N);

  std::vector<Eigen::Index> keys;
  for (Eigen::Index i = 0; i < N; ++i)
    if (!scores_t.col(i).isZero(0.0)) keys.push_back(i);

  Eigen::VectorXd acc(N);
  for (Eigen::Index r = 0; r < D; ++r) {
    if (w.V.row(r).isZero(0.0)) continue;
    const Eigen::RowVectorXd vz = w.V.row(r) * Z;
    acc.setZero();
    for (Eigen::Index i : keys) acc += vz[i] * scores_t.col(i);
    delta.row(r) = acc.transpose();
  }
  for (Eigen::Index r = 0; r < D; ++r) {
    if (w.S.row(r).isZero(0.0)) continue;
    delta.row(r) += w.S.row(r) * Z;
  }

  if (normalized) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
    for (Eigen::Index i : keys) s += scores_t.col(i);
    for (Eigen::Index j = 0; j < N; ++j) {
      if (!(s[j] > 0.0))
        throw InvalidKernel("normalized attention: score sum at token " + std::to_string(j) +
                            " is not positive");
      delta.col(j) /= s[j];
    }
  }
  return delta;
}

bool state_blown_up(const Eigen::MatrixXd& Z, const TokenLayout& lay) {
  for (Eigen::Index r : {lay.mean_row(), lay.var_row()})
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
      const double v = Z(r, j);
      if (!std::isfinite(v) || std::abs(v) > 1e12) return true;
    }
  return false;
}

PPDMoments read_out(const Eigen::MatrixXd& W, const Eigen::MatrixXd& Z) {
  const Eigen::Vector2d m = W * Z.col(Z.cols() - 1);
  return {m[0], m[1]};
}

}  // namespace

Eigen::MatrixXd attn(const Eigen::MatrixXd& Z, const LayerWeights& w, const Eigen::MatrixXd& mask,
                     const KernelSpec& score_kernel, bool normalized) {
  const Eigen::Index D = Z.rows();
  const Eigen::Index N = Z.cols();
  if (w.V.rows() != D || w.V.cols() != D || w.K.rows() != D || w.K.cols() != D ||
      w.Q.rows() != D || w.Q.cols() != D || w.S.rows() != D || w.S.cols() != D)
    throw InvalidInput("attn: weight matrices do not match the token dimension");
  if (mask.rows() != N || mask.cols() != N)
    throw InvalidInput("attn: mask does not match the token count");
  const Eigen::MatrixXd KZ = w.K * Z;
  const Eigen::MatrixXd QZ = w.Q * Z;
  return apply_layer(Z, w, masked_scores_t(KZ, QZ, mask, score_kernel), normalized);
}

ForwardResult forward(const TransformerConfig& config, const Eigen::MatrixXd& Z0,
                      bool keep_trace) {
  const std::vector<LayerWeights> layers = construct_weights(config);
  const TokenLayout lay{config.d};
  if (Z0.rows() != lay.rows())
    throw InvalidInput("forward: tokens have " + std::to_string(Z0.rows()) + " rows, expected " +
                       std::to_string(lay.rows()));
  if (Z0.cols() < 2) throw InvalidInput("forward: need at least one context token");
  const Eigen::Index n = Z0.cols() - 1;
  const KernelSpec score_kernel = config.kernel.lifted(config.d, 4);
  const Eigen::MatrixXd W = config.readout();

  ForwardResult out;
  Eigen::MatrixXd Z = Z0;
  if (keep_trace) out.trace.push_back(Z);
  out.layer_moments.push_back(read_out(W, Z));

  // Scores depend only on K z and Q z; reuse them while those are unchanged.
  struct Cached {
    Eigen::MatrixXd KZ, QZ, scores_t;
  };
  std::optional<Cached> cache[2];
  const Eigen::MatrixXd masks[2] = {attention_mask(MaskKind::FirstLayer, n),
                                    attention_mask(MaskKind::Context, n)};

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerWeights& w = layers[l];
    const int slot = w.mask == MaskKind::FirstLayer ? 0 : 1;
    Eigen::MatrixXd KZ = w.K * Z;
    Eigen::MatrixXd QZ = w.Q * Z;
    auto& c = cache[slot];
    if (!c || !(c->KZ.array() == KZ.array()).all() || !(c->QZ.array() == QZ.array()).all()) {
      Eigen::MatrixXd st = masked_scores_t(KZ, QZ, masks[slot], score_kernel);
      c = Cached{std::move(KZ), std::move(QZ), std::move(st)};
    }
    const bool normalized = config.normalized && w.mask == MaskKind::Context;
    Z += apply_layer(Z, w, c->scores_t, normalized);
    out.diverged = out.diverged || state_blown_up(Z, lay);
    if (keep_trace) out.trace.push_back(Z);
    out.layer_moments.push_back(read_out(W, Z));
  }
  out.moments = out.layer_moments.back();
  out.final_tokens = std::move(Z);
  return out;
}

}  // namespace icgp
