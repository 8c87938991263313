#include "lrf/membench.hpp"

#include "lrf/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace lrf {

namespace {

using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Grid rows that must be resident to evaluate the local term of one row.
Index window_rows(const TokenGrid& grid, Index max_dilation) {
  return std::min(2 * max_dilation + 1, grid.rows());
}

// Rows whose global output waits for their look-ahead neighbors.
Index pending_rows(const TokenGrid& grid, Index max_dilation) { return std::min(max_dilation + 1, grid.rows()); }

/// Rows of per-token vectors stored by grid row in a ring of fixed capacity.
class RowRing {
 public:
  RowRing(Index capacity_rows, Index cols, Index d, StateCounter& counter)
      : capacity_(capacity_rows),
        cols_(cols),
        d_(d),
        buf_(static_cast<std::size_t>(capacity_rows * cols * d), 0.0, CountingAllocator<double>(counter)) {}

  Eigen::Map<Eigen::RowVectorXd> at(Index token) {
    return Eigen::Map<Eigen::RowVectorXd>(buf_.data() + slot(token), d_);
  }
  Eigen::Map<const Eigen::RowVectorXd> at(Index token) const {
    return Eigen::Map<const Eigen::RowVectorXd>(buf_.data() + slot(token), d_);
  }

 private:
  Index slot(Index token) const {
    const Index row = token / cols_;
    const Index col = token % cols_;
    return ((row % capacity_) * cols_ + col) * d_;
  }

  Index capacity_;
  Index cols_;
  Index d_;
  CountedBuffer buf_;
};

// Local term for one token from values resident in the ring. Accumulation order
// (dilation, then tap) matches lrf_local_term.
Eigen::RowVectorXd local_from_ring(const RowRing& ring, Index token, const TokenGrid& grid, const LrfConfig& cfg,
                                   Index d) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
  for (std::size_t di = 0; di < cfg.dilations.size(); ++di) {
    for (int tap = 0; tap < kTaps; ++tap) {
      if (const auto m = neighbor_index(grid, token, tap_offset(tap, cfg.dilations[di]))) {
        acc += cfg.weights[di].row(tap).cwiseProduct(ring.at(*m));
      }
    }
  }
  return acc;
}

RowMatrix stream_ssa_v1(const StreamInputs& in, double s, StateCounter& state) {
  const Index n = in.q.rows();
  CountedBuffer scores(static_cast<std::size_t>(n * n), 0.0, CountingAllocator<double>(state));
  RowMap score_map(scores.data(), n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      score_map(i, j) = s * in.q.row(i).dot(in.k.row(j));
    }
  }
  RowMatrix out(n, in.v.cols());
  for (Index i = 0; i < n; ++i) {
    out.row(i).noalias() = score_map.row(i) * in.v;
  }
  return out;
}

RowMatrix stream_ssa_v2(const StreamInputs& in, double s, StateCounter& state) {
  const Index n = in.q.rows();
  const Index d = in.q.cols();
  CountedBuffer kv(static_cast<std::size_t>(d * in.v.cols()), 0.0, CountingAllocator<double>(state));
  RowMap acc(kv.data(), d, in.v.cols());
  for (Index j = 0; j < n; ++j) {
    acc.noalias() += in.k.row(j).transpose() * in.v.row(j);
  }
  RowMatrix out(n, in.v.cols());
  for (Index i = 0; i < n; ++i) {
    out.row(i).noalias() = s * (in.q.row(i) * acc);
  }
  return out;
}

RowMatrix stream_lrf_ssa_causal(const StreamInputs& in, const TokenGrid& grid, StateCounter& state,
                                StateCounter& local) {
  const Index n = in.q.rows();
  const Index d = in.v.cols();
  const Index dmax = in.cfg.max_dilation();
  const double s = in.cfg.scale;
  CountedBuffer kv(static_cast<std::size_t>(in.q.cols() * d), 0.0, CountingAllocator<double>(state));
  RowMap acc(kv.data(), in.q.cols(), d);
  RowRing values(window_rows(grid, dmax), grid.cols(), d, local);
  RowRing global(pending_rows(grid, dmax), grid.cols(), d, local);
  RowMatrix out(n, d);
  auto emit_row = [&](Index row) {
    for (Index c = 0; c < grid.cols(); ++c) {
      const Index token = row * grid.cols() + c;
      const Eigen::RowVectorXd loc = local_from_ring(values, token, grid, in.cfg, d);
      out.row(token) = global.at(token) + loc;
    }
  };
  for (Index token = 0; token < n; ++token) {
    acc.noalias() += in.k.row(token).transpose() * in.v.row(token);
    global.at(token).noalias() = s * (in.q.row(token) * acc);
    values.at(token) = in.v.row(token);
    const Index row = token / grid.cols();
    if (token % grid.cols() == grid.cols() - 1 && row - dmax >= 0) {
      emit_row(row - dmax);
    }
  }
  for (Index row = std::max<Index>(grid.rows() - dmax, 0); row < grid.rows(); ++row) {
    emit_row(row);
  }
  return out;
}

RowMatrix stream_lrf_dyn(const StreamInputs& in, const TokenGrid& grid, StateCounter& state, StateCounter& local) {
  const DendriticParams& params = *in.dyn;
  const Index n = in.tokens.rows();
  const Index d = in.tokens.cols();
  const Index dmax = in.cfg.max_dilation();
  CountedBuffer potential(static_cast<std::size_t>(params.k() * d), 0.0, CountingAllocator<double>(state));
  RowMap s_map(potential.data(), params.k(), d);
  RowRing response(window_rows(grid, dmax), grid.cols(), d, local);
  RowMatrix out(n, d);
  RowMatrix next(params.k(), d);
  auto emit_row = [&](Index row) {
    for (Index c = 0; c < grid.cols(); ++c) {
      const Index token = row * grid.cols() + c;
      const Eigen::RowVectorXd loc = local_from_ring(response, token, grid, in.cfg, d);
      out.row(token) = response.at(token) + loc;
    }
  };
  for (Index token = 0; token < n; ++token) {
    next.noalias() = params.m_trans() * s_map;
    next.noalias() += params.gamma_in() * in.tokens.row(token);
    s_map = next;
    response.at(token) = (params.c_read().transpose() * s_map).cwiseProduct(params.big_gamma().transpose());
    const Index row = token / grid.cols();
    if (token % grid.cols() == grid.cols() - 1 && row - dmax >= 0) {
      emit_row(row - dmax);
    }
  }
  for (Index row = std::max<Index>(grid.rows() - dmax, 0); row < grid.rows(); ++row) {
    emit_row(row);
  }
  return out;
}

}  // namespace

MemMode parse_mem_mode(std::string_view name) {
  if (name == "ssa_v1") return MemMode::ssa_v1;
  if (name == "ssa_v2") return MemMode::ssa_v2;
  if (name == "lrf_ssa_causal") return MemMode::lrf_ssa_causal;
  if (name == "lrf_dyn") return MemMode::lrf_dyn;
  throw std::domain_error("unknown memory mode: " + std::string(name));
}

std::string_view to_string(MemMode mode) {
  switch (mode) {
    case MemMode::ssa_v1:
      return "ssa_v1";
    case MemMode::ssa_v2:
      return "ssa_v2";
    case MemMode::lrf_ssa_causal:
      return "lrf_ssa_causal";
    case MemMode::lrf_dyn:
      return "lrf_dyn";
  }
  return "?";
}

Index analytic_state_values(MemMode mode, Index n, Index d, Index k) {
  switch (mode) {
    case MemMode::ssa_v1:
      return n * n;
    case MemMode::ssa_v2:
    case MemMode::lrf_ssa_causal:
      return d * d;
    case MemMode::lrf_dyn:
      return k * d;
  }
  throw std::domain_error("analytic_state_values: invalid mode");
}

Index analytic_local_buffer_values(MemMode mode, const TokenGrid& grid, Index d, Index max_dilation) {
  switch (mode) {
    case MemMode::ssa_v1:
    case MemMode::ssa_v2:
      return 0;
    case MemMode::lrf_ssa_causal:
      return (window_rows(grid, max_dilation) + pending_rows(grid, max_dilation)) * grid.cols() * d;
    case MemMode::lrf_dyn:
      return window_rows(grid, max_dilation) * grid.cols() * d;
  }
  throw std::domain_error("analytic_local_buffer_values: invalid mode");
}

StreamInputs make_stream_inputs(MemMode mode, Index n, Index d, Index k, const std::vector<Index>& dilations,
                                std::uint64_t seed) {
  Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(mode), static_cast<std::uint64_t>(n * 100003 + d)));
  StreamInputs in;
  in.cfg = LrfConfig::uniform(d, rng, -0.5, 0.5, dilations);
  if (mode == MemMode::lrf_dyn) {
    if (k < 1) {
      throw std::domain_error("make_stream_inputs: lrf_dyn needs k >= 1");
    }
    in.tokens = rng.binary_matrix(n, d, 0.25);
    in.dyn = std::make_shared<const DendriticParams>(DendriticParams::random_stable(k, d, rng));
  } else {
    in.q = rng.binary_matrix(n, d, 0.25);
    in.k = rng.binary_matrix(n, d, 0.25);
    in.v = rng.binary_matrix(n, d, 0.25);
  }
  return in;
}

StreamResult run_streaming(MemMode mode, const StreamInputs& inputs, const TokenGrid& grid) {
  StateCounter state;
  StateCounter local;
  StreamResult res;
  const bool dyn = mode == MemMode::lrf_dyn;
  const Index n = dyn ? inputs.tokens.rows() : inputs.q.rows();
  const Index d = dyn ? inputs.tokens.cols() : inputs.v.cols();
  grid.require_tokens(n);
  switch (mode) {
    case MemMode::ssa_v1:
      res.output = stream_ssa_v1(inputs, inputs.cfg.scale, state);
      break;
    case MemMode::ssa_v2:
      res.output = stream_ssa_v2(inputs, inputs.cfg.scale, state);
      break;
    case MemMode::lrf_ssa_causal:
      res.output = stream_lrf_ssa_causal(inputs, grid, state, local);
      break;
    case MemMode::lrf_dyn:
      if (!inputs.dyn) {
        throw std::domain_error("run_streaming: lrf_dyn needs dendritic parameters");
      }
      res.output = stream_lrf_dyn(inputs, grid, state, local);
      break;
  }
  res.profile.mode = mode;
  res.profile.n = n;
  res.profile.d = d;
  res.profile.k = dyn ? inputs.dyn->k() : 0;
  res.profile.peak_state_values = static_cast<Index>(state.peak());
  res.profile.local_buffer_values = static_cast<Index>(local.peak());
  return res;
}

RowMatrix run_batch(MemMode mode, const StreamInputs& inputs, const TokenGrid& grid) {
  switch (mode) {
    case MemMode::ssa_v1:
      return ssa_quadratic(inputs.q, inputs.k, inputs.v, inputs.cfg.scale);
    case MemMode::ssa_v2:
      return ssa_linear(inputs.q, inputs.k, inputs.v, inputs.cfg.scale);
    case MemMode::lrf_ssa_causal:
      return lrf_ssa_causal(inputs.q, inputs.k, inputs.v, grid, inputs.cfg);
    case MemMode::lrf_dyn:
      return lrf_dyn_pre(inputs.tokens, grid, *inputs.dyn, inputs.cfg, DynRoute::scan);
  }
  throw std::domain_error("run_batch: invalid mode");
}

MemProfile profile(MemMode mode, Index n, Index d, Index k, const TokenGrid& grid,
                   const std::vector<Index>& dilations, std::uint64_t seed) {
  if (n < 1 || d < 1) {
    throw std::domain_error("profile: dimensions must be positive");
  }
  const StreamInputs inputs = make_stream_inputs(mode, n, d, k, dilations, seed);
  StreamResult res = run_streaming(mode, inputs, grid);
  res.profile.k = k;
  res.profile.batch_residual = max_abs_diff(res.output, run_batch(mode, inputs, grid));
  return res.profile;
}

CompareReport compare(const std::vector<MemMode>& modes, const MemSweep& sweep) {
  if (modes.empty() || sweep.ns.empty() || sweep.ds.empty()) {
    throw std::domain_error("compare: need at least one mode and one configuration");
  }
  CompareReport report;
  for (Index n : sweep.ns) {
    const TokenGrid grid = TokenGrid::near_square(n);
    for (Index d : sweep.ds) {
      const std::size_t first = report.rows.size();
      for (MemMode mode : modes) {
        report.rows.push_back(profile(mode, n, d, sweep.k, grid, sweep.dilations, sweep.seed));
      }
      for (std::size_t i = 0; i < modes.size(); ++i) {
        for (std::size_t j = i + 1; j < modes.size(); ++j) {
          const auto& a = report.rows[first + i];
          const auto& b = report.rows[first + j];
          report.ratios.push_back({a.mode, b.mode, n, d,
                                   static_cast<double>(a.peak_state_values) /
                                       static_cast<double>(b.peak_state_values)});
        }
      }
    }
  }
  return report;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::domain_error("fit_loglog_slope: need at least two paired points");
  }
  const auto m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

std::string to_json(const CompareReport& report) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"mode", std::string(to_string(r.mode))},
                         {"n", r.n},
                         {"d", r.d},
                         {"k", r.k},
                         {"peak_state_values", r.peak_state_values},
                         {"local_buffer_values", r.local_buffer_values},
                         {"total", r.total()},
                         {"batch_residual", r.batch_residual}});
  }
  j["ratios"] = nlohmann::json::array();
  for (const auto& r : report.ratios) {
    j["ratios"].push_back({{"numerator", std::string(to_string(r.numerator))},
                           {"denominator", std::string(to_string(r.denominator))},
                           {"n", r.n},
                           {"d", r.d},
                           {"ratio", r.ratio}});
  }
  return j.dump(2) + "\n";
}

std::string to_csv(const CompareReport& report) {
  std::ostringstream os;
  os << "mode,n,d,k,peak_state_values,local_buffer_values,total,batch_residual\n";
  os << std::setprecision(17);
  for (const auto& r : report.rows) {
    os << to_string(r.mode) << ',' << r.n << ',' << r.d << ',' << r.k << ',' << r.peak_state_values << ','
       << r.local_buffer_values << ',' << r.total() << ',' << r.batch_residual << '\n';
  }
  return os.str();
}

}  // namespace lrf
