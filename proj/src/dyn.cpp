#include "lrf/dyn.hpp"

#include "lrf/random.hpp"

#include <unsupported/Eigen/FFT>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrf {

double spectral_radius(const RowMatrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("spectral_radius: matrix must be square and non-empty");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectral_radius: eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

DendriticParams::DendriticParams(RowMatrix m_trans, Vector c_read, Vector gamma_in, Vector big_gamma,
                                 std::optional<Vector> alpha_k)
    : m_trans_(std::move(m_trans)),
      c_read_(std::move(c_read)),
      gamma_in_(std::move(gamma_in)),
      big_gamma_(std::move(big_gamma)),
      alpha_k_(std::move(alpha_k)) {
  if (m_trans_.rows() < 1 || m_trans_.rows() != m_trans_.cols()) {
    throw std::invalid_argument("DendriticParams: transition must be k x k with k >= 1");
  }
  check_lengths();
  if (!m_trans_.allFinite()) {
    throw std::invalid_argument("DendriticParams: transition has non-finite entries");
  }
  radius_ = lrf::spectral_radius(m_trans_);
  if (!(radius_ < 1.0)) {
    throw std::invalid_argument("DendriticParams: transition spectral radius " + std::to_string(radius_) +
                                " is not below 1");
  }
}

void DendriticParams::check_lengths() const {
  const Index k = m_trans_.rows();
  if (c_read_.size() != k || gamma_in_.size() != k || (alpha_k_ && alpha_k_->size() != k)) {
    throw std::invalid_argument("DendriticParams: dendrite vectors must have length k = " + std::to_string(k));
  }
  if (big_gamma_.size() < 1) {
    throw std::invalid_argument("DendriticParams: per-channel gain must be non-empty");
  }
}

DendriticParams DendriticParams::tridiagonal(const Vector& taus, const Vector& upper, const Vector& lower,
                                             Vector c_read, Vector gamma_in, Vector big_gamma) {
  const Index k = taus.size();
  if (k < 1 || upper.size() != k - 1 || lower.size() != k - 1) {
    throw std::invalid_argument("DendriticParams::tridiagonal: need k taus and k-1 couplings per side");
  }
  RowMatrix m = RowMatrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    if (!(taus[i] > 1.0)) {
      throw std::invalid_argument("DendriticParams::tridiagonal: every tau must exceed 1");
    }
    m(i, i) = 1.0 - 1.0 / taus[i];
    if (i + 1 < k) {
      m(i, i + 1) = upper[i];
      m(i + 1, i) = lower[i];
    }
  }
  return DendriticParams(std::move(m), std::move(c_read), std::move(gamma_in), std::move(big_gamma));
}

DendriticParams DendriticParams::random_stable(Index k, Index d, Rng& rng) {
  Vector taus(k), upper(std::max<Index>(k - 1, 0)), lower(std::max<Index>(k - 1, 0));
  for (Index i = 0; i < k; ++i) {
    taus[i] = rng.uniform(1.5, 16.0);
  }
  // |diag| <= 15/16 and off-diagonal row sums <= 0.06 keep every Gershgorin disc inside the unit circle.
  for (Index i = 0; i + 1 < k; ++i) {
    upper[i] = rng.uniform(-0.03, 0.03);
    lower[i] = rng.uniform(-0.03, 0.03);
  }
  Vector c(k), g(k), big(d);
  for (Index i = 0; i < k; ++i) {
    c[i] = rng.uniform(0.5, 1.5) / static_cast<double>(k);
    g[i] = rng.uniform(0.5, 1.5);
  }
  for (Index i = 0; i < d; ++i) {
    big[i] = rng.uniform(0.5, 1.5);
  }
  return tridiagonal(taus, upper, lower, std::move(c), std::move(g), std::move(big));
}

void DendriticParams::set_c_read(Vector c) {
  std::swap(c_read_, c);
  try {
    check_lengths();
  } catch (...) {
    std::swap(c_read_, c);
    throw;
  }
}

void DendriticParams::set_gamma_in(Vector g) {
  std::swap(gamma_in_, g);
  try {
    check_lengths();
  } catch (...) {
    std::swap(gamma_in_, g);
    throw;
  }
}

void DendriticParams::set_big_gamma(Vector g) {
  std::swap(big_gamma_, g);
  try {
    check_lengths();
  } catch (...) {
    std::swap(big_gamma_, g);
    throw;
  }
}

Eigen::RowVectorXd dyn_step(DynState& state, const Eigen::Ref<const Eigen::RowVectorXd>& token,
                            const DendriticParams& params) {
  state.s = params.m_trans() * state.s;
  state.s.noalias() += params.gamma_in() * token;
  return (params.c_read().transpose() * state.s).cwiseProduct(params.big_gamma().transpose());
}

RowMatrix dyn_scan(const Eigen::Ref<const RowMatrix>& tokens, const DendriticParams& params) {
  if (tokens.cols() != params.d()) {
    throw std::domain_error("dyn_scan: tokens have " + std::to_string(tokens.cols()) + " channels, params " +
                            std::to_string(params.d()));
  }
  DynState state = DynState::zeros(params.k(), params.d());
  RowMatrix out(tokens.rows(), tokens.cols());
  for (Index n = 0; n < tokens.rows(); ++n) {
    out.row(n) = dyn_step(state, tokens.row(n), params);
  }
  return out;
}

DynKernel dyn_kernel(const DendriticParams& params, Index length) {
  if (length < 1) {
    throw std::domain_error("dyn_kernel: length must be positive");
  }
  // Iterated products v <- M v; no explicit matrix powers.
  Vector v = params.gamma_in();
  Vector base(length);
  for (Index m = 0; m < length; ++m) {
    base[m] = params.kernel_readout().dot(v);
    v = params.m_trans() * v;
  }
  return {base * params.big_gamma().transpose()};
}

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) {
    p <<= 1;
  }
  return p;
}

RowMatrix dyn_fft(const Eigen::Ref<const RowMatrix>& tokens, const DynKernel& kernel) {
  const Index n = tokens.rows();
  const Index d = tokens.cols();
  if (kernel.taps.cols() != d || kernel.length() < n) {
    throw std::domain_error("dyn_fft: kernel must cover n taps for every channel");
  }
  const Index len = next_pow2(2 * n);
  Eigen::FFT<double> fft;
  std::vector<double> x(static_cast<std::size_t>(len));
  std::vector<double> h(static_cast<std::size_t>(len));
  std::vector<double> y;
  std::vector<std::complex<double>> xs, hs;
  RowMatrix out(n, d);
  for (Index c = 0; c < d; ++c) {
    std::fill(x.begin(), x.end(), 0.0);
    std::fill(h.begin(), h.end(), 0.0);
    for (Index i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = tokens(i, c);
      h[static_cast<std::size_t>(i)] = kernel.taps(i, c);
    }
    fft.fwd(xs, x);
    fft.fwd(hs, h);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] *= hs[i];
    }
    fft.inv(y, xs);
    for (Index i = 0; i < n; ++i) {
      out(i, c) = y[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

RowMatrix dyn_fft(const Eigen::Ref<const RowMatrix>& tokens, const DendriticParams& params) {
  if (tokens.cols() != params.d()) {
    throw std::domain_error("dyn_fft: channel count mismatch");
  }
  return dyn_fft(tokens, dyn_kernel(params, tokens.rows()));
}

RowMatrix lrf_dyn_pre(const Eigen::Ref<const RowMatrix>& tokens, const TokenGrid& grid,
                      const DendriticParams& params, const LrfConfig& cfg, DynRoute route) {
  grid.require_tokens(tokens.rows());
  const RowMatrix h = route == DynRoute::scan ? dyn_scan(tokens, params) : dyn_fft(tokens, params);
  return h + lrf_local_term(h, grid, cfg);
}

AttentionOutput lrf_dyn(const Tensor& tokens, const TokenGrid& grid, const DendriticParams& params,
                        const LrfConfig& cfg, const LifParams& lif, DynRoute route) {
  Tensor pre(tokens.shape());
  for (Index t = 0; t < tokens.shape().t; ++t) {
    for (Index b = 0; b < tokens.shape().b; ++b) {
      pre.slice(t, b) = lrf_dyn_pre(tokens.slice(t, b), grid, params, cfg, route);
    }
  }
  SpikeTensor spikes = sn_layer(pre, lif);
  return {std::move(pre), std::move(spikes)};
}

}  // namespace lrf
