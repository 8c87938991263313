#include "lrf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lrf {

namespace {

// Rounding allowance on inequality checks between quantities that may coincide.
constexpr double kSlack = 1e-12;

void require_same_length(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::domain_error(std::string(what) + ": vectors differ in length");
  }
}

}  // namespace

void DistanceModel::validate() const {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("DistanceModel: alpha must be positive");
  }
  if (!(beta >= 0.0)) {
    throw std::invalid_argument("DistanceModel: beta must be nonnegative");
  }
  if (n < 1) {
    throw std::invalid_argument("DistanceModel: n must be positive");
  }
}

double AttentionStats::mass_within(Index radius) const {
  const Index upto = std::min<Index>(radius + 1, histogram.size());
  return upto > 0 ? histogram.head(upto).sum() : 0.0;
}

Vector distance_axis(Index n) { return Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1)); }

Vector normalize(const Eigen::Ref<const Vector>& weights) {
  if (weights.size() == 0 || (weights.array() < 0.0).any()) {
    throw std::domain_error("normalize: weights must be nonempty and nonnegative");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) {
    throw std::domain_error("normalize: weights sum to zero");
  }
  return weights / total;
}

double receptive_radius(const Eigen::Ref<const Vector>& weights, const Eigen::Ref<const Vector>& distances) {
  require_same_length(weights, distances, "receptive_radius");
  return normalize(weights).dot(distances);
}

double entropy(const Eigen::Ref<const Vector>& weights) {
  const Vector p = normalize(weights);
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      h -= p[i] * std::log(p[i]);
    }
  }
  return h;
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) {
    throw std::domain_error("binary_entropy: p outside [0, 1]");
  }
  double h = 0.0;
  if (p > 0.0) {
    h -= p * std::log(p);
  }
  if (p < 1.0) {
    h -= (1.0 - p) * std::log(1.0 - p);
  }
  return h;
}

Vector model_weights(const DistanceModel& model, ModelKind kind) {
  model.validate();
  const Vector dist = distance_axis(model.n);
  if (kind == ModelKind::vsa) {
    return (-model.beta * dist.array()).exp();
  }
  return (model.alpha - model.beta * dist.array()).max(0.0);
}

Vector lrf_mix(const Eigen::Ref<const Vector>& ssa_weights, const Eigen::Ref<const Vector>& local_weights,
               double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::domain_error("lrf_mix: lambda must lie in [0, 1]");
  }
  require_same_length(ssa_weights, local_weights, "lrf_mix");
  return (1.0 - lambda) * ssa_weights + lambda * local_weights;
}

Vector local_uniform(Index n, Index radius) {
  if (n < 1 || radius < 0) {
    throw std::domain_error("local_uniform: need n >= 1 and radius >= 0");
  }
  Vector w = Vector::Zero(n);
  const Index support = std::min(radius + 1, n);
  w.head(support).setConstant(1.0 / static_cast<double>(support));
  return w;
}

double closed_form_mu(const DistanceModel& model, ClosedFormKind kind) {
  model.validate();
  if (kind == ClosedFormKind::vsa_inf) {
    if (!(model.beta > 0.0)) {
      throw std::domain_error("closed_form_mu: vsa_inf diverges for beta = 0");
    }
    const double r = std::exp(-model.beta);
    return r / (1.0 - r);
  }
  const double n = static_cast<double>(model.n);
  const double a = model.alpha;
  const double b = model.beta;
  const double denom = 3.0 * (2.0 * a - b * (n - 1.0));
  if (denom == 0.0) {
    throw std::domain_error("closed_form_mu: ssa_inf denominator vanishes");
  }
  return (n - 1.0) * (3.0 * a - b * (2.0 * n - 1.0)) / denom;
}

double closed_form_entropy_vsa(const DistanceModel& model, bool infinite) {
  model.validate();
  const double r = std::exp(-model.beta);
  if (!(r > 0.0 && r < 1.0)) {
    throw std::domain_error("closed_form_entropy_vsa: r = exp(-beta) must lie in (0, 1)");
  }
  const double log_r = std::log(r);
  if (infinite) {
    return -std::log1p(-r) - r / (1.0 - r) * log_r;
  }
  const double n = static_cast<double>(model.n);
  const double rn = std::pow(r, n);
  const double rn1 = std::pow(r, n - 1.0);
  return std::log((1.0 - rn) / (1.0 - r)) -
         r / (1.0 - r) * (1.0 - n * rn1 + (n - 1.0) * rn) / (1.0 - rn) * log_r;
}

Theorem1Report check_theorem1(const DistanceModel& model, double lambda, Index local_radius) {
  model.validate();
  const Vector dist = distance_axis(model.n);
  const Vector p_vsa = normalize(model_weights(model, ModelKind::vsa));
  const Vector p_ssa = normalize(model_weights(model, ModelKind::ssa));
  const Vector p_r = local_uniform(model.n, local_radius);
  Theorem1Report rep;
  rep.mu_vsa = p_vsa.dot(dist);
  rep.mu_ssa = p_ssa.dot(dist);
  rep.mu_r = p_r.dot(dist);
  rep.mu_lrf = (1.0 - lambda) * rep.mu_ssa + lambda * rep.mu_r;
  rep.mu_lrf_direct = receptive_radius(lrf_mix(p_ssa, p_r, lambda), dist);
  rep.identity_residual = std::abs(rep.mu_lrf - rep.mu_lrf_direct);
  rep.assumption_violated = rep.mu_r > rep.mu_ssa;
  rep.vsa_le_lrf = rep.mu_vsa <= rep.mu_lrf + kSlack;
  rep.lrf_le_ssa = rep.mu_lrf <= rep.mu_ssa + kSlack;
  return rep;
}

Theorem2Report check_theorem2(const DistanceModel& model, double lambda,
                              const Eigen::Ref<const Vector>& local_weights) {
  model.validate();
  if (local_weights.size() != model.n) {
    throw std::domain_error("check_theorem2: local distribution must cover n distances");
  }
  const Vector p_ssa = normalize(model_weights(model, ModelKind::ssa));
  const Vector p_r = normalize(local_weights);
  Theorem2Report rep;
  rep.h_ssa = entropy(p_ssa);
  rep.h_r = entropy(p_r);
  rep.h_lrf = entropy(lrf_mix(p_ssa, p_r, lambda));
  rep.bound = binary_entropy(lambda) + (1.0 - lambda) * rep.h_ssa + lambda * rep.h_r;
  rep.bound_holds = rep.h_lrf <= rep.bound + kSlack;
  // bound <= H(ssa)  <=>  H(R) <= H(ssa) - h(lambda)/lambda
  const double margin = lambda > 0.0 ? binary_entropy(lambda) / lambda : 0.0;
  rep.premise_holds = rep.h_r <= rep.h_ssa - margin;
  rep.ordering_holds = rep.h_lrf <= rep.h_ssa + kSlack;
  return rep;
}

AttentionStats measure_attention(const Eigen::Ref<const RowMatrix>& scores, const TokenGrid& grid) {
  const Index n = scores.rows();
  if (scores.cols() != n) {
    throw std::domain_error("measure_attention: score map must be square");
  }
  grid.require_tokens(n);
  if ((scores.array() < 0.0).any()) {
    throw std::domain_error("measure_attention: scores must be nonnegative");
  }
  const Index max_dist = grid.rows() - 1 + grid.cols() - 1;
  AttentionStats st;
  st.histogram = Vector::Zero(max_dist + 1);
  st.mean_weight = Vector::Zero(max_dist + 1);
  Vector pair_count = Vector::Zero(max_dist + 1);
  for (Index i = 0; i < n; ++i) {
    const double total = scores.row(i).sum();
    if (!(total > 0.0)) {
      continue;
    }
    double mu = 0.0;
    double h = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double p = scores(i, j) / total;
      const Index dist = manhattan_distance(grid, i, j);
      st.histogram[dist] += p;
      pair_count[dist] += 1.0;
      mu += p * static_cast<double>(dist);
      if (p > 0.0) {
        h -= p * std::log(p);
      }
    }
    st.mu += mu;
    st.entropy += h;
    ++st.rows_used;
  }
  if (st.rows_used == 0) {
    throw std::domain_error("measure_attention: every score row is zero");
  }
  const double rows = static_cast<double>(st.rows_used);
  for (Index k = 0; k <= max_dist; ++k) {
    st.mean_weight[k] = pair_count[k] > 0.0 ? st.histogram[k] / pair_count[k] : 0.0;
  }
  st.histogram /= rows;
  st.mu /= rows;
  st.entropy /= rows;
  return st;
}

Theorem1Sweep sweep_theorem1(const TheoremGrid& grid) {
  Theorem1Sweep sw;
  for (double beta : grid.betas) {
    for (Index n : grid.lengths) {
      for (double lambda : grid.lambdas) {
        for (Index radius : grid.radii) {
          const Theorem1Report rep = check_theorem1({grid.alpha, beta, n}, lambda, radius);
          ++sw.lrf_le_ssa.total;
          ++sw.vsa_le_lrf.total;
          ++sw.identity.total;
          sw.lrf_le_ssa.passed += rep.lrf_le_ssa ? 1 : 0;
          sw.vsa_le_lrf.passed += rep.vsa_le_lrf ? 1 : 0;
          sw.identity.passed += rep.identity_residual <= 1e-12 ? 1 : 0;
          sw.identity.worst_residual = std::max(sw.identity.worst_residual, rep.identity_residual);
          sw.vsa_le_lrf.worst_residual = std::max(sw.vsa_le_lrf.worst_residual, rep.mu_vsa - rep.mu_lrf);
          sw.lrf_le_ssa.worst_residual = std::max(sw.lrf_le_ssa.worst_residual, rep.mu_lrf - rep.mu_ssa);
        }
      }
    }
  }
  return sw;
}

Theorem2Sweep sweep_theorem2(const TheoremGrid& grid) {
  Theorem2Sweep sw;
  for (double beta : grid.betas) {
    for (Index n : grid.lengths) {
      for (double lambda : grid.lambdas) {
        for (Index radius : grid.radii) {
          const Theorem2Report rep = check_theorem2({grid.alpha, beta, n}, lambda, local_uniform(n, radius));
          ++sw.bound.total;
          sw.bound.passed += rep.bound_holds ? 1 : 0;
          sw.bound.worst_residual = std::max(sw.bound.worst_residual, rep.h_lrf - rep.bound);
          if (rep.premise_holds) {
            ++sw.ordering.total;
            sw.ordering.passed += rep.ordering_holds ? 1 : 0;
            sw.ordering.worst_residual = std::max(sw.ordering.worst_residual, rep.h_lrf - rep.h_ssa);
          }
        }
      }
    }
  }
  return sw;
}

void write_histogram_csv(std::ostream& os, const Eigen::Ref<const Vector>& distribution) {
  os << "distance,mean_weight\n";
  os << std::setprecision(17);
  for (Index i = 0; i < distribution.size(); ++i) {
    os << i << ',' << distribution[i] << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "mechanism,mu,entropy\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.mechanism << ',' << r.mu << ',' << r.entropy << '\n';
  }
}

}  // namespace lrf
