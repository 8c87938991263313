#pragma once

#include "lrf/attention.hpp"
#include "lrf/tensor.hpp"

#include <optional>

namespace lrf {

class Rng;

/// Largest eigenvalue modulus.
double spectral_radius(const RowMatrix& m);

/// Dendritic state-space parameters shared by all channels: a k x k discrete
/// transition, input fan-in gamma_in and readout c_read over the k dendrites,
/// plus a per-channel output gain big_gamma. The transition is fixed at
/// construction and must be strictly stable (spectral radius < 1).
class DendriticParams {
 public:
  DendriticParams(RowMatrix m_trans, Vector c_read, Vector gamma_in, Vector big_gamma,
                  std::optional<Vector> alpha_k = std::nullopt);

  /// Tridiagonal transition with diagonal 1 - 1/tau_i (tau_i > 1), superdiagonal
  /// `upper` and subdiagonal `lower` couplings.
  static DendriticParams tridiagonal(const Vector& taus, const Vector& upper, const Vector& lower, Vector c_read,
                                     Vector gamma_in, Vector big_gamma);

  /// Random tridiagonal parameters that are stable by Gershgorin's bound.
  static DendriticParams random_stable(Index k, Index d, Rng& rng);

  Index k() const { return m_trans_.rows(); }
  Index d() const { return big_gamma_.size(); }

  const RowMatrix& m_trans() const { return m_trans_; }
  const Vector& c_read() const { return c_read_; }
  const Vector& gamma_in() const { return gamma_in_; }
  const Vector& big_gamma() const { return big_gamma_; }
  /// Readout used by the convolution kernel; alpha_k when given, else c_read.
  const Vector& kernel_readout() const { return alpha_k_ ? *alpha_k_ : c_read_; }
  double spectral_radius() const { return radius_; }

  void set_c_read(Vector c);
  void set_gamma_in(Vector g);
  void set_big_gamma(Vector g);

 private:
  void check_lengths() const;

  RowMatrix m_trans_;
  Vector c_read_;
  Vector gamma_in_;
  Vector big_gamma_;
  std::optional<Vector> alpha_k_;
  double radius_ = 0.0;
};

/// Dendritic membrane potentials, k x d.
struct DynState {
  RowMatrix s;

  static DynState zeros(Index k, Index d) { return {RowMatrix::Zero(k, d)}; }
};

/// Advances the state by one token and returns the readout y[c] = Gamma[c] * c_read^T s[:, c].
Eigen::RowVectorXd dyn_step(DynState& state, const Eigen::Ref<const Eigen::RowVectorXd>& token,
                            const DendriticParams& params);

/// Sequential recurrence over the rows of `tokens` (n x d), zero initial state.
RowMatrix dyn_scan(const Eigen::Ref<const RowMatrix>& tokens, const DendriticParams& params);

/// Impulse response, taps(m, c) = Gamma[c] * readout^T M^m gamma_in for m in [0, length).
struct DynKernel {
  RowMatrix taps;  // length x d

  Index length() const { return taps.rows(); }
};

DynKernel dyn_kernel(const DendriticParams& params, Index length);

/// Causal linear convolution of each channel with the kernel through
/// zero-padded FFTs of length nextpow2(2n).
RowMatrix dyn_fft(const Eigen::Ref<const RowMatrix>& tokens, const DendriticParams& params);
RowMatrix dyn_fft(const Eigen::Ref<const RowMatrix>& tokens, const DynKernel& kernel);

enum class DynRoute { scan, fft };

/// pre_sn = h + local(h) with h the dendritic response of the slice.
RowMatrix lrf_dyn_pre(const Eigen::Ref<const RowMatrix>& tokens, const TokenGrid& grid,
                      const DendriticParams& params, const LrfConfig& cfg, DynRoute route = DynRoute::scan);

/// Full LRF-Dyn block over every (t, b) slice followed by SN.
AttentionOutput lrf_dyn(const Tensor& tokens, const TokenGrid& grid, const DendriticParams& params,
                        const LrfConfig& cfg, const LifParams& lif, DynRoute route = DynRoute::scan);

Index next_pow2(Index n);

}  // namespace lrf
