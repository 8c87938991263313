#pragma once

#include "lrf/neuron.hpp"
#include "lrf/tensor.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace lrf {

class Rng;

/// Taps of one dilated 3x3 kernel: offsets {-d, 0, d} x {-d, 0, d}, center included.
inline constexpr int kTaps = 9;

inline Offset tap_offset(int tap, Index dilation) {
  return {(tap / 3 - 1) * dilation, (tap % 3 - 1) * dilation};
}

/// Depth-wise dilated local weights plus the global score scale s.
/// weights[i] is a 9 x d matrix for dilations[i]; row t holds tap t for every channel.
struct LrfConfig {
  std::vector<Index> dilations{3, 5};
  std::vector<RowMatrix> weights;
  double scale = 1.0;

  Index channels() const { return weights.empty() ? 0 : weights.front().cols(); }
  Index max_dilation() const;
  void validate() const;
  void validate(Index channels) const;

  /// All-zero local weights, default scale 1/sqrt(d).
  static LrfConfig zeros(Index channels, std::vector<Index> dilations = {3, 5},
                         std::optional<double> scale = std::nullopt);
  /// Local weights drawn uniformly from [lo, hi).
  static LrfConfig uniform(Index channels, Rng& rng, double lo, double hi, std::vector<Index> dilations = {3, 5},
                           std::optional<double> scale = std::nullopt);
};

struct QkvProjection {
  RowMatrix w_q;
  RowMatrix w_k;
  RowMatrix w_v;
  LifParams lif;

  void validate() const;
};

struct QkvSpikes {
  SpikeTensor q;
  SpikeTensor k;
  SpikeTensor v;
};

/// Pre-SN activations and the spikes produced from them.
struct AttentionOutput {
  Tensor pre_sn;
  SpikeTensor spikes;
};

// ---------------------------------------------------------------------------
// Slice kernels: one (t, b) slice, tokens x channels.

/// softmax(logit_scale * Q K^T) V, with logit_scale defaulting to 1/sqrt(d).
template <typename DQ, typename DK, typename DV>
RowMatrixT<typename DQ::Scalar> vsa(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                    const Eigen::MatrixBase<DV>& v, std::optional<double> logit_scale = std::nullopt) {
  using Scalar = typename DQ::Scalar;
  const Scalar c = static_cast<Scalar>(logit_scale.value_or(1.0 / std::sqrt(static_cast<double>(q.cols()))));
  RowMatrixT<Scalar> scores = c * (q * k.transpose());
  for (Index i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return scores * v;
}

/// Row-stochastic softmax attention matrix used by vsa.
template <typename DQ, typename DK>
RowMatrixT<typename DQ::Scalar> vsa_scores(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                           std::optional<double> logit_scale = std::nullopt) {
  using Scalar = typename DQ::Scalar;
  const Scalar c = static_cast<Scalar>(logit_scale.value_or(1.0 / std::sqrt(static_cast<double>(q.cols()))));
  RowMatrixT<Scalar> scores = c * (q * k.transpose());
  for (Index i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return scores;
}

/// s * (Q K^T) V through the explicit N x N score matrix.
template <typename DQ, typename DK, typename DV>
RowMatrixT<typename DQ::Scalar> ssa_quadratic(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                              const Eigen::MatrixBase<DV>& v, typename DQ::Scalar s) {
  const RowMatrixT<typename DQ::Scalar> scores = s * (q * k.transpose());
  return scores * v;
}

/// s * Q (K^T V) through the d x d key-value aggregate.
template <typename DQ, typename DK, typename DV>
RowMatrixT<typename DQ::Scalar> ssa_linear(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                           const Eigen::MatrixBase<DV>& v, typename DQ::Scalar s) {
  const RowMatrixT<typename DQ::Scalar> kv = k.transpose() * v;
  return s * (q * kv);
}

/// Depth-wise dilated local term: out[n, c] = sum over dilations and taps of
/// w[tap, c] * values[rho(n, tap), c]. Neighbors outside the grid contribute zero.
template <typename DV>
RowMatrixT<typename DV::Scalar> lrf_local_term(const Eigen::MatrixBase<DV>& values, const TokenGrid& grid,
                                               const LrfConfig& cfg) {
  using Scalar = typename DV::Scalar;
  grid.require_tokens(values.rows());
  cfg.validate(values.cols());
  RowMatrixT<Scalar> out = RowMatrixT<Scalar>::Zero(values.rows(), values.cols());
  for (std::size_t di = 0; di < cfg.dilations.size(); ++di) {
    const RowMatrix& w = cfg.weights[di];
    for (int tap = 0; tap < kTaps; ++tap) {
      const Offset off = tap_offset(tap, cfg.dilations[di]);
      for (Index n = 0; n < values.rows(); ++n) {
        if (const auto m = neighbor_index(grid, n, off)) {
          out.row(n) += w.row(tap).template cast<Scalar>().cwiseProduct(values.row(*m));
        }
      }
    }
  }
  return out;
}

/// Streaming causal LRF-SSA for one slice. A running d x d accumulator holds
/// sum_{j<=n} k_j^T v_j; token n reads it with s * q_n after adding its own term.
/// The local term is evaluated on the full value slice.
template <typename DQ, typename DK, typename DV>
RowMatrixT<typename DQ::Scalar> lrf_ssa_causal(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                               const Eigen::MatrixBase<DV>& v, const TokenGrid& grid,
                                               const LrfConfig& cfg) {
  using Scalar = typename DQ::Scalar;
  const Index n_tokens = q.rows();
  const Index d = q.cols();
  RowMatrixT<Scalar> acc = RowMatrixT<Scalar>::Zero(d, v.cols());
  RowMatrixT<Scalar> out(n_tokens, v.cols());
  const auto s = static_cast<Scalar>(cfg.scale);
  for (Index n = 0; n < n_tokens; ++n) {
    acc.noalias() += k.row(n).transpose() * v.row(n);
    out.row(n).noalias() = s * (q.row(n) * acc);
  }
  out += lrf_local_term(v, grid, cfg);
  return out;
}

/// Per-pair contribution magnitudes of LRF-SSA: entry (n, m) is
/// sum_c | s (q_n . k_m) v_m[c] + sum_{taps with rho(n, tap) = m} w[tap, c] v_m[c] |,
/// i.e. how much token m moves the pre-SN output of token n.
RowMatrix contribution_matrix(const Eigen::Ref<const RowMatrix>& q, const Eigen::Ref<const RowMatrix>& k,
                              const Eigen::Ref<const RowMatrix>& v, const TokenGrid& grid, const LrfConfig& cfg);

struct LocalTermGrad {
  RowMatrix values;                // dL/dvalues
  std::vector<RowMatrix> weights;  // dL/dw per dilation, 9 x d
};

/// Adjoint of lrf_local_term for the given upstream gradient.
LocalTermGrad lrf_local_term_backward(const Eigen::Ref<const RowMatrix>& grad_out,
                                      const Eigen::Ref<const RowMatrix>& values, const TokenGrid& grid,
                                      const LrfConfig& cfg);

// ---------------------------------------------------------------------------
// Tensor-level wrappers over every (t, b) slice.

QkvSpikes project_qkv(const SpikeTensor& x, const QkvProjection& proj);

Tensor vsa(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor ssa_quadratic(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, double s);
Tensor ssa_linear(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, double s);
Tensor lrf_local_term(const SpikeTensor& v, const TokenGrid& grid, const LrfConfig& cfg);

/// pre_sn = s Q (K^T V) + local(V); spikes = SN(pre_sn).
AttentionOutput lrf_ssa(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, const TokenGrid& grid,
                        const LrfConfig& cfg, const LifParams& lif);

Tensor lrf_ssa_causal(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, const TokenGrid& grid,
                      const LrfConfig& cfg);

}  // namespace lrf
