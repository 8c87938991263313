#pragma once

#include "lrf/tensor.hpp"

#include <string_view>

namespace lrf {

/// Leaky integrate-and-fire constants. Firing is inclusive: U >= v_th spikes.
struct LifParams {
  double v_th = 1.0;
  double v_reset = 0.0;
  double tau = 0.5;

  void validate() const;
};

/// Pre-synaptic membrane potential H carried between timesteps.
struct LifState {
  RowMatrix h;

  static LifState zeros(Index rows, Index cols) { return {RowMatrix::Zero(rows, cols)}; }
};

struct LifStepResult {
  RowMatrix spikes;
  LifState state;
};

/// One charge-fire-reset step: U = H + input, S = [U >= v_th], H' = v_reset*S + tau*U*(1-S).
LifStepResult lif_step(const LifState& state, const Eigen::Ref<const RowMatrix>& input, const LifParams& params);

/// Runs lif_step along the time axis of every (b) lane with zero initial potential.
SpikeTensor sn_layer(const Tensor& x, const LifParams& params);

enum class SurrogateKind { rectangular, sigmoid_derivative };

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::sigmoid_derivative;
  double width = 0.5;

  void validate() const;
};

SurrogateKind parse_surrogate_kind(std::string_view name);
std::string_view to_string(SurrogateKind kind);

/// Stand-in derivative of the Heaviside spike at post-synaptic potential u.
/// Both kinds integrate to one over u.
double surrogate_grad(double u, const LifParams& params, const SurrogateSpec& spec);

/// Forward record kept for backpropagation through an SN layer.
struct SnTrace {
  Tensor u;       // post-synaptic potential per step
  Tensor spikes;  // emitted spikes per step
};

SnTrace sn_forward(const Tensor& x, const LifParams& params);

/// Gradient of the loss with respect to the SN input current, given the
/// gradient with respect to the emitted spikes. The Heaviside derivative is
/// replaced by surrogate_grad; the reset path is differentiated as well.
Tensor sn_backward(const SnTrace& trace, const Tensor& grad_spikes, const LifParams& params,
                   const SurrogateSpec& spec);

}  // namespace lrf
