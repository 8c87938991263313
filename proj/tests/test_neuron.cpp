#include "lrf/neuron.hpp"
#include "lrf/random.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lrf;

namespace {

RowMatrix scalar(double x) { return RowMatrix::Constant(1, 1, x); }

}  // namespace

TEST(LifStep, ThresholdCrossingResets) {
  const auto r = lif_step(LifState::zeros(1, 1), scalar(1.2), LifParams{});
  EXPECT_EQ(r.spikes(0, 0), 1.0);
  EXPECT_EQ(r.state.h(0, 0), 0.0);
}

TEST(LifStep, SubthresholdDecays) {
  const auto r = lif_step(LifState{scalar(0.5)}, scalar(0.0), LifParams{});
  EXPECT_EQ(r.spikes(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(r.state.h(0, 0), 0.25);
}

TEST(LifStep, ConstantDriveTrace) {
  const LifParams p{1.0, 0.0, 1.0};
  LifState st = LifState::zeros(1, 1);
  const double expect_s[] = {0, 0, 1, 0, 0};
  const double expect_h[] = {0.4, 0.8, 0.0, 0.4, 0.8};
  for (int i = 0; i < 5; ++i) {
    auto r = lif_step(st, scalar(0.4), p);
    EXPECT_EQ(r.spikes(0, 0), expect_s[i]) << "step " << i;
    EXPECT_NEAR(r.state.h(0, 0), expect_h[i], 1e-15) << "step " << i;
    st = std::move(r.state);
  }
}

TEST(LifStep, ShapeMismatchThrows) {
  EXPECT_THROW(lif_step(LifState::zeros(2, 2), RowMatrix::Zero(2, 3), LifParams{}), std::domain_error);
}

TEST(SnLayer, SilentAndSaturatedInputs) {
  const Shape4 shape{3, 2, 4, 5};
  EXPECT_EQ(sn_layer(Tensor(shape), LifParams{}).values().flat().sum(), 0.0);
  Tensor x(shape);
  x.slice(0, 0).setConstant(1.0);
  x.slice(0, 1).setConstant(1.0);
  const SpikeTensor s = sn_layer(x, LifParams{});
  EXPECT_EQ(s.slice(0, 0).sum(), 20.0);
  EXPECT_EQ(s.slice(0, 1).sum(), 20.0);
}

TEST(SnLayer, MatchesScalarSimulation) {
  Rng rng(3);
  const Shape4 shape{4, 2, 6, 3};
  const Tensor x = rng.normal_tensor(shape, 0.8);
  const LifParams p{1.0, 0.0, 0.5};
  const SpikeTensor s = sn_layer(x, p);
  for (Index b = 0; b < shape.b; ++b) {
    for (Index n = 0; n < shape.n; ++n) {
      for (Index d = 0; d < shape.d; ++d) {
        oracle::ScalarLif lif{p.v_th, p.v_reset, p.tau};
        for (Index t = 0; t < shape.t; ++t) {
          EXPECT_EQ(s(t, b, n, d), lif.step(x(t, b, n, d)));
        }
      }
    }
  }
}

TEST(Surrogate, Examples) {
  const LifParams p{};
  EXPECT_DOUBLE_EQ(surrogate_grad(1.0, p, {SurrogateKind::rectangular, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(surrogate_grad(11.0, p, {SurrogateKind::rectangular, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(surrogate_grad(1.0, p, {SurrogateKind::sigmoid_derivative, 1.0}), 0.25);
}

TEST(Surrogate, IntegratesToOne) {
  const LifParams p{};
  for (const SurrogateKind kind : {SurrogateKind::rectangular, SurrogateKind::sigmoid_derivative}) {
    const SurrogateSpec spec{kind, 0.5};
    double total = 0.0;
    const double h = 1e-4;
    for (double u = -20.0; u < 20.0; u += h) {
      total += h * surrogate_grad(u + 0.5 * h, p, spec);
    }
    EXPECT_NEAR(total, 1.0, 1e-3) << to_string(kind);
  }
}

TEST(Surrogate, ParsesNames) {
  EXPECT_EQ(parse_surrogate_kind("rectangular"), SurrogateKind::rectangular);
  EXPECT_EQ(parse_surrogate_kind(to_string(SurrogateKind::sigmoid_derivative)), SurrogateKind::sigmoid_derivative);
  EXPECT_EQ(parse_surrogate_kind("sigmoid"), SurrogateKind::sigmoid_derivative);
  EXPECT_THROW(parse_surrogate_kind("tanh"), std::invalid_argument);
  EXPECT_THROW((SurrogateSpec{SurrogateKind::rectangular, 0.0}.validate()), std::invalid_argument);
}

TEST(SnBackward, SingleStepUsesSurrogatePointwise) {
  Rng rng(11);
  const Tensor x = rng.normal_tensor({1, 1, 5, 4}, 1.0);
  const LifParams p{};
  const SurrogateSpec spec{};
  const SnTrace tr = sn_forward(x, p);
  Tensor g(x.shape());
  g.flat().setOnes();
  const Tensor gx = sn_backward(tr, g, p, spec);
  for (Index i = 0; i < x.size(); ++i) {
    EXPECT_DOUBLE_EQ(gx.flat()[i], surrogate_grad(x.flat()[i], p, spec));
  }
}

TEST(SnBackward, MatchesFiniteDifferenceOfSmoothedForward) {
  // With the Heaviside replaced by a sigmoid of the same width, the surrogate
  // backward is the exact gradient of that smoothed forward pass.
  const LifParams p{1.0, 0.0, 0.5};
  const SurrogateSpec spec{SurrogateKind::sigmoid_derivative, 0.5};
  Rng rng(5);
  const Index steps = 4;
  std::vector<double> x(steps), w(steps);
  for (Index t = 0; t < steps; ++t) {
    x[t] = rng.normal();
    w[t] = rng.normal();
  }
  auto smooth_loss = [&](const std::vector<double>& in) {
    double h = 0.0, loss = 0.0;
    for (Index t = 0; t < steps; ++t) {
      const double u = h + in[t];
      const double s = 1.0 / (1.0 + std::exp(-(u - p.v_th) / spec.width));
      loss += w[t] * s;
      h = p.v_reset * s + p.tau * u * (1.0 - s);
    }
    return loss;
  };
  // Smoothed trace: rebuild forward with soft spikes and run the adjoint by hand.
  std::vector<double> u(steps), s(steps);
  double h = 0.0;
  for (Index t = 0; t < steps; ++t) {
    u[t] = h + x[t];
    s[t] = 1.0 / (1.0 + std::exp(-(u[t] - p.v_th) / spec.width));
    h = p.v_reset * s[t] + p.tau * u[t] * (1.0 - s[t]);
  }
  Tensor tu(Shape4{steps, 1, 1, 1}), ts(Shape4{steps, 1, 1, 1}), gs(Shape4{steps, 1, 1, 1});
  for (Index t = 0; t < steps; ++t) {
    tu(t, 0, 0, 0) = u[t];
    ts(t, 0, 0, 0) = s[t];
    gs(t, 0, 0, 0) = w[t];
  }
  const Tensor gx = sn_backward(SnTrace{tu, ts}, gs, p, spec);
  for (Index t = 0; t < steps; ++t) {
    auto xp = x, xm = x;
    xp[t] += 1e-6;
    xm[t] -= 1e-6;
    const double fd = (smooth_loss(xp) - smooth_loss(xm)) / 2e-6;
    EXPECT_NEAR(gx(t, 0, 0, 0), fd, 1e-7) << "t=" << t;
  }
}
