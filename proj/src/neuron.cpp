#include "lrf/neuron.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lrf {

void LifParams::validate() const {
  if (!(v_th > v_reset)) {
    throw std::invalid_argument("LifParams: v_th must exceed v_reset");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("LifParams: tau must lie in (0, 1]");
  }
}

void SurrogateSpec::validate() const {
  if (!(width > 0.0)) {
    throw std::invalid_argument("SurrogateSpec: width must be positive");
  }
}

SurrogateKind parse_surrogate_kind(std::string_view name) {
  if (name == "rectangular") {
    return SurrogateKind::rectangular;
  }
  if (name == "sigmoid" || name == "sigmoid-derivative") {
    return SurrogateKind::sigmoid_derivative;
  }
  throw std::invalid_argument("unknown surrogate kind: " + std::string(name));
}

std::string_view to_string(SurrogateKind kind) {
  return kind == SurrogateKind::rectangular ? "rectangular" : "sigmoid-derivative";
}

LifStepResult lif_step(const LifState& state, const Eigen::Ref<const RowMatrix>& input, const LifParams& params) {
  if (state.h.rows() != input.rows() || state.h.cols() != input.cols()) {
    throw std::domain_error("lif_step: state and input shapes differ");
  }
  const RowMatrix u = state.h + input;
  LifStepResult out;
  out.spikes = (u.array() >= params.v_th).cast<double>();
  out.state.h = params.v_reset * out.spikes.array() + params.tau * u.array() * (1.0 - out.spikes.array());
  return out;
}

SpikeTensor sn_layer(const Tensor& x, const LifParams& params) {
  return SpikeTensor(sn_forward(x, params).spikes);
}

double surrogate_grad(double u, const LifParams& params, const SurrogateSpec& spec) {
  const double z = u - params.v_th;
  switch (spec.kind) {
    case SurrogateKind::rectangular:
      return std::abs(z) <= 0.5 * spec.width ? 1.0 / spec.width : 0.0;
    case SurrogateKind::sigmoid_derivative: {
      const double s = 1.0 / (1.0 + std::exp(-z / spec.width));
      return s * (1.0 - s) / spec.width;
    }
  }
  return 0.0;
}

SnTrace sn_forward(const Tensor& x, const LifParams& params) {
  const Shape4& shape = x.shape();
  SnTrace trace{Tensor(shape), Tensor(shape)};
  for (Index b = 0; b < shape.b; ++b) {
    LifState state = LifState::zeros(shape.n, shape.d);
    for (Index t = 0; t < shape.t; ++t) {
      trace.u.slice(t, b) = state.h + x.slice(t, b);
      LifStepResult step = lif_step(state, x.slice(t, b), params);
      trace.spikes.slice(t, b) = step.spikes;
      state = std::move(step.state);
    }
  }
  return trace;
}

Tensor sn_backward(const SnTrace& trace, const Tensor& grad_spikes, const LifParams& params,
                   const SurrogateSpec& spec) {
  const Shape4& shape = trace.u.shape();
  if (!(grad_spikes.shape() == shape)) {
    throw std::domain_error("sn_backward: gradient shape differs from trace");
  }
  Tensor grad_in(shape);
  const Index lane = shape.n * shape.d;
  for (Index b = 0; b < shape.b; ++b) {
    Vector grad_h = Vector::Zero(lane);  // dL/dH[t] flowing back from step t+1
    for (Index t = shape.t - 1; t >= 0; --t) {
      const auto u = trace.u.slice(t, b);
      const auto s = trace.spikes.slice(t, b);
      const auto gs = grad_spikes.slice(t, b);
      auto gi = grad_in.slice(t, b);
      for (Index i = 0; i < lane; ++i) {
        const double ui = u.data()[i];
        const double si = s.data()[i];
        const double sg = surrogate_grad(ui, params, spec);
        const double d_spike = gs.data()[i] + grad_h[i] * (params.v_reset - params.tau * ui);
        const double d_u = d_spike * sg + grad_h[i] * params.tau * (1.0 - si);
        gi.data()[i] = d_u;
        grad_h[i] = d_u;
      }
    }
  }
  return grad_in;
}

}  // namespace lrf
