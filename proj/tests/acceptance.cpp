// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
// Reference values come from the brute-force oracles in oracles.hpp or from
// loops written out here, not from the library's own checkers.

#include "oracles.hpp"

#include "lrf/analysis.hpp"
#include "lrf/attention.hpp"
#include "lrf/dyn.hpp"
#include "lrf/membench.hpp"
#include "lrf/random.hpp"
#include "lrf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace {

using lrf::Index;
using lrf::RowMatrix;
using lrf::Rng;
using lrf::Vector;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // <= 0 means unbounded
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::uint64_t kStream = 0xacce;

// -------------------------------------------------------------------------

Outcome associativity() {
  double worst = 0.0;
  double worst_oracle = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(Rng::derive(seed, kStream, 1));
    const Index n = 1 + static_cast<Index>(rng.below(64));
    const Index d = 1 + static_cast<Index>(rng.below(32));
    const Index t = 1 + static_cast<Index>(rng.below(4));
    const lrf::Shape4 shape{t, 1, n, d};
    const auto q = rng.spikes(shape, 0.5), k = rng.spikes(shape, 0.5), v = rng.spikes(shape, 0.5);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    const lrf::Tensor quad = lrf::ssa_quadratic(q, k, v, s);
    const lrf::Tensor lin = lrf::ssa_linear(q, k, v, s);
    worst = std::max(worst, lrf::max_abs_diff(quad, lin));
    for (Index ti = 0; ti < t; ++ti) {
      const RowMatrix ref = lrf::oracle::ssa_triple_loop(q.slice(ti, 0), k.slice(ti, 0), v.slice(ti, 0), s);
      worst_oracle = std::max(worst_oracle, lrf::max_abs_diff(lin.slice(ti, 0), ref));
    }
  }
  return {worst <= 1e-9 && worst_oracle <= 1e-9,
          fmt("max|quadratic - linear| = %.3g, max|linear - triple loop| = %.3g (tol 1e-9)", worst, worst_oracle)};
}

Outcome causal_decomposition() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(Rng::derive(seed, kStream, 2));
    const lrf::TokenGrid grid(4, 4);
    const RowMatrix q = rng.binary_matrix(16, 8, 0.5), k = rng.binary_matrix(16, 8, 0.5),
                    v = rng.binary_matrix(16, 8, 0.5);
    const lrf::LrfConfig cfg = lrf::LrfConfig::uniform(8, rng, -1.0, 1.0, {1, 2});
    const RowMatrix ref = lrf::oracle::causal_global(q, k, v, cfg.scale) +
                          lrf::oracle::local_gather(v, 4, 4, cfg.dilations, cfg.weights);
    worst = std::max(worst, lrf::max_abs_diff(lrf::lrf_ssa_causal(q, k, v, grid, cfg), ref));
  }
  return {worst <= 1e-9, fmt("50 seeds, 4x4, d=8: max residual %.3g (tol 1e-9)", worst)};
}

Outcome scan_fft_duality() {
  double worst = 0.0;
  for (const Index n : {8, 64, 256, 1024}) {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      Rng rng(Rng::derive(rep, kStream, 300 + static_cast<std::uint64_t>(n)));
      const lrf::DendriticParams p = lrf::DendriticParams::random_stable(8, 64, rng);
      const RowMatrix x = rng.normal_matrix(n, 64);
      const RowMatrix scan = lrf::dyn_scan(x, p);
      const RowMatrix fft = lrf::dyn_fft(x, p);
      const double floor = 1e-8 * scan.cwiseAbs().maxCoeff();
      for (Index i = 0; i < scan.size(); ++i) {
        const double ref = scan.data()[i];
        worst = std::max(worst, std::abs(fft.data()[i] - ref) / std::max(std::abs(ref), floor));
      }
    }
  }
  return {worst <= 1e-6, fmt("N in {8,64,256,1024}, d=64, k=8, 80 parameterizations: max rel %.3g (tol 1e-6)", worst)};
}

std::vector<double> distances(Index n) {
  std::vector<double> d(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = static_cast<double>(i);
  return d;
}

std::vector<double> normalized(std::vector<double> w) {
  double z = 0.0;
  for (double x : w) z += x;
  for (double& x : w) x /= z;
  return w;
}

std::vector<double> vsa_law(double beta, Index n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::exp(-beta * static_cast<double>(i));
  return normalized(w);
}

std::vector<double> ssa_law(double alpha, double beta, Index n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = std::max(alpha - beta * static_cast<double>(i), 0.0);
  }
  return normalized(w);
}

std::vector<double> local_law(Index n, Index radius) {
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i <= std::min(radius, n - 1); ++i) w[static_cast<std::size_t>(i)] = 1.0;
  return normalized(w);
}

double mean(const std::vector<double>& p) {
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) m += static_cast<double>(i) * p[i];
  return m;
}

double shannon(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

std::vector<double> mix(const std::vector<double>& a, const std::vector<double>& b, double lambda) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - lambda) * a[i] + lambda * b[i];
  return out;
}

const lrf::TheoremGrid kGrid{};

Outcome theorem1() {
  int total = 0, vsa_le_lrf = 0, lrf_le_ssa = 0;
  double identity = 0.0;
  for (const double beta : kGrid.betas) {
    for (const Index n : kGrid.lengths) {
      for (const double lambda : kGrid.lambdas) {
        for (const Index radius : kGrid.radii) {
          const auto p_vsa = vsa_law(beta, n);
          const auto p_ssa = ssa_law(kGrid.alpha, beta, n);
          const auto p_r = local_law(n, radius);
          const double mu_vsa = mean(p_vsa), mu_ssa = mean(p_ssa);
          const double mu_lrf = (1.0 - lambda) * mu_ssa + lambda * mean(p_r);
          identity = std::max(identity, std::abs(mu_lrf - mean(mix(p_ssa, p_r, lambda))));
          const lrf::Theorem1Report lib = lrf::check_theorem1({kGrid.alpha, beta, n}, lambda, radius);
          identity = std::max(identity, std::abs(lib.mu_lrf - mu_lrf));
          ++total;
          vsa_le_lrf += mu_vsa <= mu_lrf ? 1 : 0;
          lrf_le_ssa += mu_lrf <= mu_ssa ? 1 : 0;
        }
      }
    }
  }
  return {vsa_le_lrf == total && lrf_le_ssa == total && identity <= 1e-12,
          fmt("mu_vsa <= mu_lrf %d/%d, mu_lrf <= mu_ssa %d/%d, identity residual %.3g (tol 1e-12)", vsa_le_lrf, total,
              lrf_le_ssa, total, identity)};
}

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

Outcome theorem2() {
  int total = 0, bound_ok = 0, premise = 0, ordering_ok = 0;
  for (const double beta : kGrid.betas) {
    for (const Index n : kGrid.lengths) {
      for (const double lambda : kGrid.lambdas) {
        for (const Index radius : kGrid.radii) {
          const auto p_ssa = ssa_law(kGrid.alpha, beta, n);
          const auto p_r = local_law(n, radius);
          const double h_ssa = shannon(p_ssa), h_r = shannon(p_r);
          const double h_lrf = shannon(mix(p_ssa, p_r, lambda));
          ++total;
          bound_ok += h_lrf <= binary_entropy(lambda) + (1.0 - lambda) * h_ssa + lambda * h_r + 1e-12 ? 1 : 0;
          if (h_r <= h_ssa - binary_entropy(lambda) / lambda) {
            ++premise;
            ordering_ok += h_lrf <= h_ssa ? 1 : 0;
          }
        }
      }
    }
  }
  double entropy_err = 0.0;
  for (const double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (Index n = 2; n <= 200; ++n) {
      const double closed = lrf::closed_form_entropy_vsa({1.0, -std::log(r), n}, false);
      entropy_err = std::max(entropy_err, std::abs(closed - lrf::oracle::truncated_geometric_entropy(r, n)));
    }
  }
  return {bound_ok == total && ordering_ok == premise && premise > 0 && entropy_err <= 1e-9,
          fmt("bound %d/%d, ordering %d/%d premise points, closed-form entropy max err %.3g (tol 1e-9)", bound_ok,
              total, ordering_ok, premise, entropy_err)};
}

Outcome closed_form_mu() {
  double worst = 0.0;
  for (const double beta : {std::log(3.0), std::numbers::ln2, 0.1}) {
    const double series = lrf::oracle::geometric_mean_series(std::exp(-beta), 1000000);
    worst = std::max(worst, std::abs(series - lrf::closed_form_mu({1.0, beta, 1}, lrf::ClosedFormKind::vsa_inf)));
  }
  const double ln2 = lrf::closed_form_mu({1.0, std::numbers::ln2, 1}, lrf::ClosedFormKind::vsa_inf);
  return {worst <= 1e-6 && std::abs(ln2 - 1.0) <= 1e-6,
          fmt("max |series - closed form| = %.3g (tol 1e-6); beta = ln 2 gives %.12f", worst, ln2)};
}

Outcome memory_hierarchy() {
  lrf::MemSweep sweep;
  sweep.ns = {16, 64, 256};
  sweep.ds = {64, 256, 512};
  sweep.k = 8;
  const lrf::CompareReport rep = lrf::compare(
      {lrf::MemMode::ssa_v1, lrf::MemMode::ssa_v2, lrf::MemMode::lrf_ssa_causal, lrf::MemMode::lrf_dyn}, sweep);
  int exact = 0;
  double residual = 0.0;
  for (const auto& row : rep.rows) {
    Index expected = 0;
    switch (row.mode) {
      case lrf::MemMode::ssa_v1:
        expected = row.n * row.n;
        break;
      case lrf::MemMode::ssa_v2:
      case lrf::MemMode::lrf_ssa_causal:
        expected = row.d * row.d;
        break;
      case lrf::MemMode::lrf_dyn:
        expected = 8 * row.d;
        break;
    }
    exact += row.peak_state_values == expected ? 1 : 0;
    residual = std::max(residual, row.batch_residual);
  }
  double ratio = 0.0;
  for (const auto& row_a : rep.rows) {
    for (const auto& row_b : rep.rows) {
      if (row_a.mode == lrf::MemMode::ssa_v2 && row_b.mode == lrf::MemMode::lrf_dyn && row_a.d == 512 &&
          row_b.d == 512 && row_a.n == row_b.n) {
        ratio = static_cast<double>(row_a.peak_state_values) / static_cast<double>(row_b.peak_state_values);
      }
    }
  }
  const int total = static_cast<int>(rep.rows.size());
  return {exact == total && total == 36 && ratio == 64.0 && residual <= 1e-9,
          fmt("exact peaks %d/%d, d=512 k=8 ratio %.17g, stream-vs-batch residual %.3g (tol 1e-9)", exact, total,
              ratio, residual)};
}

Outcome gradient_verification() {
  double worst = 0.0;
  int min_checked = 1 << 30;
  bool finite = true;
  for (const auto kind : {lrf::BlockKind::lrf_dyn, lrf::BlockKind::lrf_ssa, lrf::BlockKind::ssa}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const lrf::GradCheckResult r = lrf::smooth_grad_check(kind, seed, 200);
      worst = std::max(worst, r.max_rel_error);
      min_checked = std::min(min_checked, r.checked);
      finite = finite && r.finite;
    }
  }
  return {finite && min_checked >= 100 && worst <= 1e-4,
          fmt("3 blocks x 5 seeds, >= %d parameters each: max rel error %.3g (tol 1e-4)", min_checked, worst)};
}

Outcome convergence() {
  std::string detail;
  bool ok = true;
  for (const auto kind : {lrf::BlockKind::lrf_dyn, lrf::BlockKind::lrf_ssa}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      lrf::TrainConfig cfg;
      cfg.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const lrf::TrainResult res = lrf::train_toy(lrf::ToyTask{}, kind, cfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::vector<double> losses;
      for (const auto& e : res.log) losses.push_back(e.train_loss);
      const int rises = lrf::smoothed_loss_increases(losses);
      const double acc = res.log.back().test_acc;
      const bool run_ok = acc >= 0.90 && rises == 0 && secs < 120.0 && res.log.size() == 50;
      ok = ok && run_ok;
      detail += fmt("%s%s/%d acc %.3f rises %d %.0fs", detail.empty() ? "" : "; ",
                    std::string(lrf::to_string(kind)).c_str(), static_cast<int>(seed), acc, rises, secs);
    }
  }
  return {ok, detail};
}

Outcome locality() {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(Rng::derive(seed, kStream, 10));
    const RowMatrix q = rng.binary_matrix(64, 16, 0.25), k = rng.binary_matrix(64, 16, 0.25),
                    v = rng.binary_matrix(64, 16, 0.25);
    const lrf::LrfConfig cfg = lrf::LrfConfig::uniform(16, rng, 0.1, 1.0);
    const std::vector<RowMatrix> zero(cfg.weights.size(), RowMatrix::Zero(9, 16));
    auto within4 = [](const lrf::oracle::RowStats& st) {
      double m = 0.0;
      for (std::size_t i = 0; i <= 4; ++i) m += st.histogram[i];
      return m;
    };
    const double lrf_mass = within4(lrf::oracle::per_row_stats(
        lrf::oracle::contribution(q, k, v, 8, 8, cfg.dilations, cfg.weights, cfg.scale), 8, 8));
    const double ssa_mass = within4(
        lrf::oracle::per_row_stats(lrf::oracle::contribution(q, k, v, 8, 8, cfg.dilations, zero, cfg.scale), 8, 8));
    wins += lrf_mass > ssa_mass ? 1 : 0;
  }
  return {wins >= 95, fmt("LRF-SSA more local than SSA in %d/100 seeds (need >= 95)", wins)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "associativity equivalence", 5.0, associativity},
      {2, "causal decomposition", 5.0, causal_decomposition},
      {3, "scan/FFT duality", 30.0, scan_fft_duality},
      {4, "theorem 1 grid", 0.0, theorem1},
      {5, "theorem 2 grid", 0.0, theorem2},
      {6, "closed-form mu", 0.0, closed_form_mu},
      {7, "memory hierarchy", 0.0, memory_hierarchy},
      {8, "gradient verification", 60.0, gradient_verification},
      {9, "convergence", 0.0, convergence},
      {10, "locality statistic", 0.0, locality},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.passed;
    if (c.time_limit_s > 0.0 && secs >= c.time_limit_s) {
      pass = false;
      o.detail += fmt(" [over time limit %.0fs]", c.time_limit_s);
    }
    failed += pass ? 0 : 1;
    std::printf("%s  criterion %2d  %-26s %8.2fs  %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
