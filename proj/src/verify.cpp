#include "lrf/verify.hpp"

#include "lrf/analysis.hpp"
#include "lrf/attention.hpp"
#include "lrf/dyn.hpp"
#include "lrf/membench.hpp"
#include "lrf/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lrf {

namespace {

constexpr std::uint64_t kVerifyStream = 0x5eed;

/// Running worst case over many cases of one check.
class Tally {
 public:
  Tally(std::string name, double tolerance) { res_.name = std::move(name), res_.tolerance = tolerance; }

  void add(double residual) {
    ++res_.cases_total;
    if (residual <= res_.tolerance) {
      ++res_.cases_passed;
    }
    res_.residual = std::max(res_.residual, residual);
  }

  CheckResult finish(std::string detail = {}) {
    res_.passed = res_.cases_total > 0 && res_.cases_passed == res_.cases_total;
    res_.detail = std::move(detail);
    return res_;
  }

 private:
  CheckResult res_;
};

CheckResult count_check(std::string name, int passed, int total, int required, std::string detail) {
  CheckResult r;
  r.name = std::move(name);
  r.cases_passed = passed;
  r.cases_total = total;
  r.residual = static_cast<double>(total - passed);
  r.tolerance = static_cast<double>(total - required);
  r.passed = passed >= required && total > 0;
  r.detail = std::move(detail);
  return r;
}

CheckResult grid_check(std::string name, const GridTally& t, double tolerance, std::string detail) {
  CheckResult r;
  r.name = std::move(name);
  r.cases_passed = t.passed;
  r.cases_total = t.total;
  r.residual = t.worst_residual;
  r.tolerance = tolerance;
  r.passed = t.total > 0 && t.all_passed();
  r.detail = std::move(detail);
  return r;
}

// Nested-loop causal reference: s * sum_{j<=n} (q_n . k_j) v_j.
RowMatrix causal_reference(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, double s) {
  RowMatrix out = RowMatrix::Zero(q.rows(), v.cols());
  for (Index n = 0; n < q.rows(); ++n) {
    for (Index j = 0; j <= n; ++j) {
      out.row(n) += s * q.row(n).dot(k.row(j)) * v.row(j);
    }
  }
  return out;
}

}  // namespace

VerifyScope parse_verify_scope(std::string_view name) {
  if (name == "all") return VerifyScope::all;
  if (name == "attention") return VerifyScope::attention;
  if (name == "dyn") return VerifyScope::dyn;
  if (name == "analysis") return VerifyScope::analysis;
  if (name == "membench") return VerifyScope::membench;
  throw std::invalid_argument("unknown verify scope: " + std::string(name));
}

std::string_view to_string(VerifyScope scope) {
  switch (scope) {
    case VerifyScope::all:
      return "all";
    case VerifyScope::attention:
      return "attention";
    case VerifyScope::dyn:
      return "dyn";
    case VerifyScope::analysis:
      return "analysis";
    case VerifyScope::membench:
      return "membench";
  }
  return "?";
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> VerifyReport::failed_names() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) {
      out.push_back(c.name);
    }
  }
  return out;
}

LocalityTrial locality_trial(std::uint64_t seed) {
  constexpr Index kSide = 8;
  constexpr Index kChannels = 16;
  Rng rng(Rng::derive(seed, kVerifyStream, 10));
  const TokenGrid grid(kSide, kSide);
  const RowMatrix q = rng.binary_matrix(kSide * kSide, kChannels, 0.25);
  const RowMatrix k = rng.binary_matrix(kSide * kSide, kChannels, 0.25);
  const RowMatrix v = rng.binary_matrix(kSide * kSide, kChannels, 0.25);
  const LrfConfig lrf = LrfConfig::uniform(kChannels, rng, 0.1, 1.0);
  const LrfConfig plain = LrfConfig::zeros(kChannels);
  LocalityTrial t;
  t.lrf_ssa = measure_attention(contribution_matrix(q, k, v, grid, lrf), grid).mass_within(4);
  t.ssa = measure_attention(contribution_matrix(q, k, v, grid, plain), grid).mass_within(4);
  return t;
}

std::vector<CheckResult> verify_attention(const VerifyOptions&) {
  std::vector<CheckResult> out;

  Tally assoc("associativity", 1e-9);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(Rng::derive(seed, kVerifyStream, 1));
    const Index n = 1 + static_cast<Index>(rng.below(64));
    const Index d = 1 + static_cast<Index>(rng.below(32));
    const Index t = 1 + static_cast<Index>(rng.below(4));
    const Shape4 shape{t, 1, n, d};
    const SpikeTensor q = rng.spikes(shape, 0.5), k = rng.spikes(shape, 0.5), v = rng.spikes(shape, 0.5);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    assoc.add(max_abs_diff(ssa_quadratic(q, k, v, s), ssa_linear(q, k, v, s)));
  }
  out.push_back(assoc.finish("100 random binary (Q, K, V), N <= 64, d <= 32, T <= 4"));

  Tally causal("causal_decomposition", 1e-9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(Rng::derive(seed, kVerifyStream, 2));
    const TokenGrid grid(4, 4);
    const RowMatrix q = rng.binary_matrix(16, 8, 0.5), k = rng.binary_matrix(16, 8, 0.5),
                    v = rng.binary_matrix(16, 8, 0.5);
    const LrfConfig cfg = LrfConfig::uniform(8, rng, -1.0, 1.0, {1, 2});
    const RowMatrix ref = causal_reference(q, k, v, cfg.scale) + lrf_local_term(v, grid, cfg);
    causal.add(max_abs_diff(lrf_ssa_causal(q, k, v, grid, cfg), ref));
  }
  out.push_back(causal.finish("50 seeds, 4 x 4 grid, d = 8"));

  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const LocalityTrial t = locality_trial(seed);
    wins += t.lrf_ssa > t.ssa ? 1 : 0;
  }
  out.push_back(count_check("locality", wins, 100, 95, "seeds where LRF-SSA mass within distance 4 exceeds SSA"));
  return out;
}

std::vector<CheckResult> verify_dyn(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  Tally duality("scan_fft_duality", 1e-6);
  for (const Index n : {8, 64, 256, 1024}) {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      Rng rng(Rng::derive(rep, kVerifyStream, 3 + static_cast<std::uint64_t>(n)));
      const Index d = 64;
      const DendriticParams p = DendriticParams::random_stable(8, d, rng);
      const RowMatrix x = rng.normal_matrix(n, d);
      DynKernel kernel = dyn_kernel(p, n);
      if (opts.perturb_kernel_tap && n > 1) {
        kernel.taps.row(1) *= 1.01;
      }
      duality.add(max_rel_diff(dyn_fft(x, kernel), dyn_scan(x, p)));
    }
  }
  out.push_back(duality.finish(std::string("N in {8, 64, 256, 1024}, d = 64, k = 8, 20 parameterizations each") +
                               (opts.perturb_kernel_tap ? "; kernel tap 1 perturbed" : "")));

  Tally linear("scan_linearity", 1e-12);
  Tally shift("scan_time_invariance", 1e-12);
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Rng rng(Rng::derive(rep, kVerifyStream, 4));
    const DendriticParams p = DendriticParams::random_stable(8, 8, rng);
    const RowMatrix x = rng.normal_matrix(64, 8), z = rng.normal_matrix(64, 8);
    const RowMatrix yx = dyn_scan(x, p);
    linear.add(max_abs_diff(dyn_scan(1.5 * x - 0.5 * z, p), 1.5 * yx - 0.5 * dyn_scan(z, p)));
    RowMatrix shifted = RowMatrix::Zero(64, 8);
    shifted.bottomRows(63) = x.topRows(63);
    const RowMatrix ys = dyn_scan(shifted, p);
    shift.add(std::max(ys.row(0).cwiseAbs().maxCoeff(), max_abs_diff(ys.bottomRows(63), yx.topRows(63))));
  }
  out.push_back(linear.finish());
  out.push_back(shift.finish());

  Tally impulse("kernel_impulse_response", 1e-12);
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    Rng rng(Rng::derive(rep, kVerifyStream, 5));
    const DendriticParams p = DendriticParams::random_stable(8, 4, rng);
    RowMatrix x = RowMatrix::Zero(128, 4);
    x.row(0).setOnes();
    impulse.add(max_abs_diff(dyn_scan(x, p), dyn_kernel(p, 128).taps));
  }
  out.push_back(impulse.finish());
  return out;
}

std::vector<CheckResult> verify_analysis(const VerifyOptions&) {
  std::vector<CheckResult> out;
  const TheoremGrid grid;
  const Theorem1Sweep t1 = sweep_theorem1(grid);
  out.push_back(grid_check("theorem1_identity", t1.identity, 1e-12, "|mu_lrf - mixed radius|"));
  out.push_back(grid_check("theorem1_lrf_le_ssa", t1.lrf_le_ssa, 0.0, "mu_lrf <= mu_ssa"));
  out.push_back(grid_check("theorem1_vsa_le_lrf", t1.vsa_le_lrf, 0.0, "mu_vsa <= mu_lrf"));
  const Theorem2Sweep t2 = sweep_theorem2(grid);
  out.push_back(grid_check("theorem2_bound", t2.bound, 0.0, "H(lrf) <= h(lambda) + (1 - lambda) H(ssa) + lambda H(R)"));
  out.push_back(grid_check("theorem2_ordering", t2.ordering, 0.0, "H(lrf) <= H(ssa) on points meeting the premise"));

  Tally h("entropy_closed_form", 1e-9);
  for (const double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (Index n = 2; n <= 200; ++n) {
      const DistanceModel m{1.0, -std::log(r), n};
      h.add(std::abs(closed_form_entropy_vsa(m, false) - entropy(model_weights(m, ModelKind::vsa))));
    }
  }
  out.push_back(h.finish("N in 2..200, r in {0.1, 0.3, 0.5, 0.7, 0.9}"));

  Tally mu("mu_closed_form", 1e-6);
  for (const double beta : {std::log(3.0), std::numbers::ln2, 0.1}) {
    const double r = std::exp(-beta);
    double series = 0.0;
    double p = 1.0 - r;
    for (long k = 0; k < 1000000 && p > 0.0; ++k) {
      series += static_cast<double>(k) * p;
      p *= r;
    }
    mu.add(std::abs(series - closed_form_mu({1.0, beta, 1}, ClosedFormKind::vsa_inf)));
  }
  mu.add(std::abs(closed_form_mu({1.0, std::numbers::ln2, 1}, ClosedFormKind::vsa_inf) - 1.0));
  out.push_back(mu.finish("series truncated at 10^6 terms; beta = ln 2 gives 1"));
  return out;
}

std::vector<CheckResult> verify_membench(const VerifyOptions&) {
  std::vector<CheckResult> out;
  MemSweep sweep;
  sweep.ns = {16, 64, 256};
  sweep.ds = {64, 256, 512};
  sweep.k = 8;
  const CompareReport rep =
      compare({MemMode::ssa_v1, MemMode::ssa_v2, MemMode::lrf_ssa_causal, MemMode::lrf_dyn}, sweep);
  Tally counts("state_counts", 0.0);
  Tally local("local_buffer_counts", 0.0);
  Tally residual("stream_batch_residual", 1e-9);
  for (const auto& row : rep.rows) {
    const TokenGrid grid = TokenGrid::near_square(row.n);
    counts.add(std::abs(static_cast<double>(row.peak_state_values -
                                            analytic_state_values(row.mode, row.n, row.d, sweep.k))));
    local.add(std::abs(static_cast<double>(row.local_buffer_values -
                                           analytic_local_buffer_values(row.mode, grid, row.d, 5))));
    residual.add(row.batch_residual);
  }
  out.push_back(counts.finish("N^2, d^2, d^2, k d for ssa_v1, ssa_v2, lrf_ssa_causal, lrf_dyn"));
  out.push_back(local.finish());
  out.push_back(residual.finish());
  Tally ratio("ratio_d512_k8", 0.0);
  for (const auto& r : rep.ratios) {
    if (r.numerator == MemMode::ssa_v2 && r.denominator == MemMode::lrf_dyn && r.d == 512) {
      ratio.add(std::abs(r.ratio - 64.0));
    }
  }
  out.push_back(ratio.finish("ssa_v2 / lrf_dyn peak state at d = 512, k = 8"));
  return out;
}

VerifyReport run_verify(VerifyScope scope, const VerifyOptions& opts) {
  VerifyReport rep;
  rep.scope = scope;
  auto append = [&](std::vector<CheckResult> part) {
    rep.checks.insert(rep.checks.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  };
  const bool all = scope == VerifyScope::all;
  if (all || scope == VerifyScope::attention) append(verify_attention(opts));
  if (all || scope == VerifyScope::dyn) append(verify_dyn(opts));
  if (all || scope == VerifyScope::analysis) append(verify_analysis(opts));
  if (all || scope == VerifyScope::membench) append(verify_membench(opts));
  return rep;
}

std::string to_json(const VerifyReport& report) {
  nlohmann::json j;
  j["schema_version"] = kVerifySchemaVersion;
  j["scope"] = std::string(to_string(report.scope));
  j["passed"] = report.passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"residual", c.residual},
                           {"tolerance", c.tolerance},
                           {"cases_passed", c.cases_passed},
                           {"cases_total", c.cases_total},
                           {"detail", c.detail}});
  }
  j["failed"] = report.failed_names();
  return j.dump(2) + "\n";
}

}  // namespace lrf
