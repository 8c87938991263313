#include "lrf/attention.hpp"

#include "lrf/random.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lrf {

namespace {

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw std::domain_error(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace

Index LrfConfig::max_dilation() const {
  return dilations.empty() ? 0 : *std::max_element(dilations.begin(), dilations.end());
}

void LrfConfig::validate() const {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("LrfConfig: scale must be positive");
  }
  if (weights.size() != dilations.size()) {
    throw std::invalid_argument("LrfConfig: one weight kernel per dilation required");
  }
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    if (dilations[i] < 1) {
      throw std::invalid_argument("LrfConfig: dilations must be positive");
    }
    if (weights[i].rows() != kTaps || weights[i].cols() != weights.front().cols()) {
      throw std::invalid_argument("LrfConfig: every kernel must be 9 x d");
    }
  }
}

void LrfConfig::validate(Index channels_expected) const {
  validate();
  if (!weights.empty() && channels() != channels_expected) {
    throw std::domain_error("LrfConfig: kernel has " + std::to_string(channels()) + " channels, input has " +
                            std::to_string(channels_expected));
  }
}

LrfConfig LrfConfig::zeros(Index channels, std::vector<Index> dilations, std::optional<double> scale) {
  LrfConfig cfg;
  cfg.dilations = std::move(dilations);
  cfg.weights.assign(cfg.dilations.size(), RowMatrix::Zero(kTaps, channels));
  cfg.scale = scale.value_or(1.0 / std::sqrt(static_cast<double>(channels)));
  cfg.validate();
  return cfg;
}

LrfConfig LrfConfig::uniform(Index channels, Rng& rng, double lo, double hi, std::vector<Index> dilations,
                             std::optional<double> scale) {
  LrfConfig cfg = zeros(channels, std::move(dilations), scale);
  for (auto& w : cfg.weights) {
    w = rng.uniform_matrix(kTaps, channels, lo, hi);
  }
  return cfg;
}

void QkvProjection::validate() const {
  if (w_q.rows() != w_k.rows() || w_q.rows() != w_v.rows() || w_q.cols() != w_k.cols() ||
      w_q.cols() != w_v.cols()) {
    throw std::invalid_argument("QkvProjection: w_q, w_k, w_v must share dimensions");
  }
  lif.validate();
}

RowMatrix contribution_matrix(const Eigen::Ref<const RowMatrix>& q, const Eigen::Ref<const RowMatrix>& k,
                              const Eigen::Ref<const RowMatrix>& v, const TokenGrid& grid, const LrfConfig& cfg) {
  const Index n_tokens = q.rows();
  grid.require_tokens(n_tokens);
  cfg.validate(v.cols());
  const RowMatrix scores = cfg.scale * (q * k.transpose());
  RowMatrix out(n_tokens, n_tokens);
  RowMatrix coeff(n_tokens, v.cols());
  for (Index n = 0; n < n_tokens; ++n) {
    coeff = scores.row(n).transpose().replicate(1, v.cols());
    for (std::size_t di = 0; di < cfg.dilations.size(); ++di) {
      for (int tap = 0; tap < kTaps; ++tap) {
        if (const auto m = neighbor_index(grid, n, tap_offset(tap, cfg.dilations[di]))) {
          coeff.row(*m) += cfg.weights[di].row(tap);
        }
      }
    }
    out.row(n) = coeff.cwiseProduct(v).cwiseAbs().rowwise().sum().transpose();
  }
  return out;
}

LocalTermGrad lrf_local_term_backward(const Eigen::Ref<const RowMatrix>& grad_out,
                                      const Eigen::Ref<const RowMatrix>& values, const TokenGrid& grid,
                                      const LrfConfig& cfg) {
  grid.require_tokens(values.rows());
  cfg.validate(values.cols());
  LocalTermGrad g;
  g.values = RowMatrix::Zero(values.rows(), values.cols());
  g.weights.assign(cfg.dilations.size(), RowMatrix::Zero(kTaps, values.cols()));
  for (std::size_t di = 0; di < cfg.dilations.size(); ++di) {
    const RowMatrix& w = cfg.weights[di];
    for (int tap = 0; tap < kTaps; ++tap) {
      const Offset off = tap_offset(tap, cfg.dilations[di]);
      for (Index n = 0; n < values.rows(); ++n) {
        if (const auto m = neighbor_index(grid, n, off)) {
          g.values.row(*m) += w.row(tap).cwiseProduct(grad_out.row(n));
          g.weights[di].row(tap) += grad_out.row(n).cwiseProduct(values.row(*m));
        }
      }
    }
  }
  return g;
}

QkvSpikes project_qkv(const SpikeTensor& x, const QkvProjection& proj) {
  proj.validate();
  const Shape4& in = x.shape();
  if (in.d != proj.w_q.rows()) {
    throw std::domain_error("project_qkv: input has " + std::to_string(in.d) + " channels, projection expects " +
                            std::to_string(proj.w_q.rows()));
  }
  const Shape4 out_shape{in.t, in.b, in.n, proj.w_q.cols()};
  Tensor cq(out_shape), ck(out_shape), cv(out_shape);
  for (Index t = 0; t < in.t; ++t) {
    for (Index b = 0; b < in.b; ++b) {
      const auto xs = x.slice(t, b);
      cq.slice(t, b).noalias() = xs * proj.w_q;
      ck.slice(t, b).noalias() = xs * proj.w_k;
      cv.slice(t, b).noalias() = xs * proj.w_v;
    }
  }
  return {sn_layer(cq, proj.lif), sn_layer(ck, proj.lif), sn_layer(cv, proj.lif)};
}

Tensor vsa(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_same_shape(q.shape(), k.shape(), "vsa");
  require_same_shape(q.shape(), v.shape(), "vsa");
  Tensor out(q.shape());
  for (Index t = 0; t < q.shape().t; ++t) {
    for (Index b = 0; b < q.shape().b; ++b) {
      out.slice(t, b) = vsa(q.slice(t, b), k.slice(t, b), v.slice(t, b));
    }
  }
  return out;
}

Tensor ssa_quadratic(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, double s) {
  require_same_shape(q.shape(), k.shape(), "ssa_quadratic");
  require_same_shape(q.shape(), v.shape(), "ssa_quadratic");
  Tensor out(q.shape());
  for (Index t = 0; t < q.shape().t; ++t) {
    for (Index b = 0; b < q.shape().b; ++b) {
      out.slice(t, b) = ssa_quadratic(q.slice(t, b), k.slice(t, b), v.slice(t, b), s);
    }
  }
  return out;
}

Tensor ssa_linear(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, double s) {
  require_same_shape(q.shape(), k.shape(), "ssa_linear");
  require_same_shape(q.shape(), v.shape(), "ssa_linear");
  Tensor out(q.shape());
  for (Index t = 0; t < q.shape().t; ++t) {
    for (Index b = 0; b < q.shape().b; ++b) {
      out.slice(t, b) = ssa_linear(q.slice(t, b), k.slice(t, b), v.slice(t, b), s);
    }
  }
  return out;
}

Tensor lrf_local_term(const SpikeTensor& v, const TokenGrid& grid, const LrfConfig& cfg) {
  Tensor out(v.shape());
  for (Index t = 0; t < v.shape().t; ++t) {
    for (Index b = 0; b < v.shape().b; ++b) {
      out.slice(t, b) = lrf_local_term(v.slice(t, b), grid, cfg);
    }
  }
  return out;
}

AttentionOutput lrf_ssa(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, const TokenGrid& grid,
                        const LrfConfig& cfg, const LifParams& lif) {
  require_same_shape(q.shape(), k.shape(), "lrf_ssa");
  require_same_shape(q.shape(), v.shape(), "lrf_ssa");
  grid.require_tokens(q.shape().n);
  Tensor pre(q.shape());
  for (Index t = 0; t < q.shape().t; ++t) {
    for (Index b = 0; b < q.shape().b; ++b) {
      pre.slice(t, b) = ssa_linear(q.slice(t, b), k.slice(t, b), v.slice(t, b), cfg.scale) +
                        lrf_local_term(v.slice(t, b), grid, cfg);
    }
  }
  SpikeTensor spikes = sn_layer(pre, lif);
  return {std::move(pre), std::move(spikes)};
}

Tensor lrf_ssa_causal(const SpikeTensor& q, const SpikeTensor& k, const SpikeTensor& v, const TokenGrid& grid,
                      const LrfConfig& cfg) {
  require_same_shape(q.shape(), k.shape(), "lrf_ssa_causal");
  require_same_shape(q.shape(), v.shape(), "lrf_ssa_causal");
  Tensor out(q.shape());
  for (Index t = 0; t < q.shape().t; ++t) {
    for (Index b = 0; b < q.shape().b; ++b) {
      out.slice(t, b) = lrf_ssa_causal(q.slice(t, b), k.slice(t, b), v.slice(t, b), grid, cfg);
    }
  }
  return out;
}

}  // namespace lrf
