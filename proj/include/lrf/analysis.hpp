#pragma once

#include "lrf/tensor.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lrf {

/// Linear similarity decay q_i^T k_j ~ alpha - beta * distance over n positions.
/// One position per distance (distances 0..n-1).
struct DistanceModel {
  double alpha = 1.0;
  double beta = 0.0;
  Index n = 1;

  void validate() const;
  /// True when alpha - beta * (n - 1) >= 0, i.e. the SSA weights need no clipping.
  bool ssa_nonnegative() const { return beta * static_cast<double>(n - 1) <= alpha; }
};

enum class ModelKind { vsa, ssa };
enum class ClosedFormKind { vsa_inf, ssa_inf };

/// Distance histogram and summary statistics of an attention map.
struct AttentionStats {
  Vector histogram;    // normalized mass per distance, averaged over rows; sums to 1
  Vector mean_weight;  // average normalized per-pair weight at each distance
  double mu = 0.0;     // expected receptive radius
  double entropy = 0.0;
  Index rows_used = 0;

  /// Fraction of attention mass at distance <= radius.
  double mass_within(Index radius) const;
};

/// Distances 0, 1, ..., n-1.
Vector distance_axis(Index n);

/// weights / sum(weights); all-zero or negative input is a domain error.
Vector normalize(const Eigen::Ref<const Vector>& weights);

double receptive_radius(const Eigen::Ref<const Vector>& weights, const Eigen::Ref<const Vector>& distances);

/// Shannon entropy in nats of the normalized weights, with 0 log 0 = 0.
double entropy(const Eigen::Ref<const Vector>& weights);

double binary_entropy(double p);

/// Unnormalized weights over distances 0..n-1: exp(-beta*D) or max(alpha - beta*D, 0).
Vector model_weights(const DistanceModel& model, ModelKind kind);

/// (1 - lambda) * ssa + lambda * local for two distributions on the same support.
Vector lrf_mix(const Eigen::Ref<const Vector>& ssa_weights, const Eigen::Ref<const Vector>& local_weights,
               double lambda);

/// Uniform distribution on distances 0..radius, zero beyond, over n positions.
Vector local_uniform(Index n, Index radius);

double closed_form_mu(const DistanceModel& model, ClosedFormKind kind);

/// Entropy of the truncated geometric distance law with ratio r = exp(-beta);
/// `infinite` selects the n -> infinity limit.
double closed_form_entropy_vsa(const DistanceModel& model, bool infinite);

struct Theorem1Report {
  double mu_vsa = 0.0;
  double mu_ssa = 0.0;
  double mu_r = 0.0;
  double mu_lrf = 0.0;         // (1 - lambda) mu_ssa + lambda mu_r
  double mu_lrf_direct = 0.0;  // receptive_radius of the mixed distribution
  double identity_residual = 0.0;
  bool vsa_le_lrf = false;
  bool lrf_le_ssa = false;
  bool assumption_violated = false;  // mu_r > mu_ssa
};

Theorem1Report check_theorem1(const DistanceModel& model, double lambda, Index local_radius);

struct Theorem2Report {
  double h_lrf = 0.0;
  double h_ssa = 0.0;
  double h_r = 0.0;
  double bound = 0.0;  // h(lambda) + (1 - lambda) H(ssa) + lambda H(R)
  bool bound_holds = false;
  bool premise_holds = false;   // H(R) <= H(ssa) - h(lambda)/lambda
  bool ordering_holds = false;  // H(lrf) <= H(ssa), meaningful when premise_holds
};

Theorem2Report check_theorem2(const DistanceModel& model, double lambda, const Eigen::Ref<const Vector>& local_weights);

/// Per-row normalization of a nonnegative n x n score map, then grid-distance
/// histogram, mean receptive radius and mean row entropy. Zero rows are skipped.
AttentionStats measure_attention(const Eigen::Ref<const RowMatrix>& scores, const TokenGrid& grid);

/// Parameter grid for the ordering theorems.
struct TheoremGrid {
  double alpha = 1.0;
  std::vector<double> betas{0.005, 0.01, 0.05, 0.1};
  std::vector<Index> lengths{32, 100, 256};
  std::vector<double> lambdas{0.1, 0.5, 0.9};
  std::vector<Index> radii{1, 2, 4};
};

struct GridTally {
  int total = 0;
  int passed = 0;
  double worst_residual = 0.0;
  bool all_passed() const { return passed == total; }
};

struct Theorem1Sweep {
  GridTally lrf_le_ssa;
  GridTally vsa_le_lrf;
  GridTally identity;  // residual <= 1e-12
};

struct Theorem2Sweep {
  GridTally bound;
  GridTally ordering;  // over points satisfying the premise only
};

Theorem1Sweep sweep_theorem1(const TheoremGrid& grid);
Theorem2Sweep sweep_theorem2(const TheoremGrid& grid);

struct SummaryRow {
  std::string mechanism;
  double mu = 0.0;
  double entropy = 0.0;
};

/// "distance,mean_weight" rows of a normalized distance distribution.
void write_histogram_csv(std::ostream& os, const Eigen::Ref<const Vector>& distribution);
/// "mechanism,mu,entropy" rows.
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace lrf
