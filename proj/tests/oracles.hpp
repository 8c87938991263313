#pragma once

// Brute-force reference implementations. None of these call into the library's
// kernels; they share only the plain data types.

#include "lrf/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

namespace lrf::oracle {

/// O(N^2 d) triple loop for s (Q K^T) V.
inline RowMatrix ssa_triple_loop(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, double s) {
  RowMatrix out = RowMatrix::Zero(q.rows(), v.cols());
  for (Index i = 0; i < q.rows(); ++i) {
    for (Index j = 0; j < k.rows(); ++j) {
      double score = 0.0;
      for (Index c = 0; c < q.cols(); ++c) {
        score += q(i, c) * k(j, c);
      }
      for (Index c = 0; c < v.cols(); ++c) {
        out(i, c) += s * score * v(j, c);
      }
    }
  }
  return out;
}

/// Gathers every dilated 3x3 neighbor from explicit row/column arithmetic.
/// weights[di](tap, c) with tap = 3 * (a + 1) + (b + 1) for offsets (a*d, b*d).
inline RowMatrix local_gather(const RowMatrix& values, Index rows, Index cols, const std::vector<Index>& dilations,
                              const std::vector<RowMatrix>& weights) {
  RowMatrix out = RowMatrix::Zero(values.rows(), values.cols());
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index n = r * cols + c;
      for (std::size_t di = 0; di < dilations.size(); ++di) {
        const Index dil = dilations[di];
        for (int a = -1; a <= 1; ++a) {
          for (int b = -1; b <= 1; ++b) {
            const Index rr = r + a * dil;
            const Index cc = c + b * dil;
            if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) {
              continue;
            }
            const int tap = 3 * (a + 1) + (b + 1);
            for (Index ch = 0; ch < values.cols(); ++ch) {
              out(n, ch) += weights[di](tap, ch) * values(rr * cols + cc, ch);
            }
          }
        }
      }
    }
  }
  return out;
}

/// Nested-loop causal global sum s * sum_{j<=n} (q_n . k_j) v_j.
inline RowMatrix causal_global(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, double s) {
  RowMatrix out = RowMatrix::Zero(q.rows(), v.cols());
  for (Index n = 0; n < q.rows(); ++n) {
    for (Index j = 0; j <= n; ++j) {
      const double score = q.row(n).dot(k.row(j));
      out.row(n) += s * score * v.row(j);
    }
  }
  return out;
}

/// Impulse response c^T M^m g through explicit matrix powers.
inline Vector matrix_power_kernel(const RowMatrix& m, const Vector& c, const Vector& g, Index length) {
  Vector out(length);
  RowMatrix power = RowMatrix::Identity(m.rows(), m.cols());
  for (Index i = 0; i < length; ++i) {
    out[i] = c.dot(power * g);
    power = power * m;
  }
  return out;
}

/// Direct causal convolution y[n, ch] = gain[ch] * sum_{j<=n} kernel[n-j] x[j, ch].
inline RowMatrix causal_convolution(const RowMatrix& x, const Vector& kernel, const Vector& gain) {
  RowMatrix out = RowMatrix::Zero(x.rows(), x.cols());
  for (Index n = 0; n < x.rows(); ++n) {
    for (Index j = 0; j <= n; ++j) {
      for (Index ch = 0; ch < x.cols(); ++ch) {
        out(n, ch) += gain[ch] * kernel[n - j] * x(j, ch);
      }
    }
  }
  return out;
}

/// sum_{D < terms} D r^D (1 - r).
inline double geometric_mean_series(double r, long terms) {
  double total = 0.0;
  double p = 1.0 - r;
  for (long k = 0; k < terms; ++k) {
    total += static_cast<double>(k) * p;
    p *= r;
    if (p == 0.0) {
      break;
    }
  }
  return total;
}

/// Entropy of the geometric law P(D) = r^D (1 - r), truncated after `terms`.
inline double geometric_entropy_series(double r, long terms) {
  double h = 0.0;
  double p = 1.0 - r;
  for (long k = 0; k < terms && p > 0.0; ++k) {
    h -= p * std::log(p);
    p *= r;
  }
  return h;
}

/// Entropy of the truncated geometric law over 0..n-1 by direct enumeration.
inline double truncated_geometric_entropy(double r, Index n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  double z = 0.0;
  double p = 1.0;
  for (Index i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = p;
    z += p;
    p *= r;
  }
  double h = 0.0;
  for (double x : w) {
    const double q = x / z;
    if (q > 0.0) {
      h -= q * std::log(q);
    }
  }
  return h;
}

/// Per-pair contribution magnitudes of the global plus dilated local terms:
/// (n, m) -> sum_c |s (q_n . k_m) v_m[c] + sum of weights of taps of n landing on m, times v_m[c]|.
inline RowMatrix contribution(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, Index rows, Index cols,
                              const std::vector<Index>& dilations, const std::vector<RowMatrix>& weights, double s) {
  const Index n_tokens = q.rows();
  RowMatrix out = RowMatrix::Zero(n_tokens, n_tokens);
  for (Index n = 0; n < n_tokens; ++n) {
    RowMatrix coeff(n_tokens, v.cols());
    for (Index m = 0; m < n_tokens; ++m) {
      double score = 0.0;
      for (Index c = 0; c < q.cols(); ++c) {
        score += q(n, c) * k(m, c);
      }
      for (Index c = 0; c < v.cols(); ++c) {
        coeff(m, c) = s * score;
      }
    }
    const Index r = n / cols;
    const Index col = n % cols;
    for (std::size_t di = 0; di < dilations.size(); ++di) {
      for (int a = -1; a <= 1; ++a) {
        for (int b = -1; b <= 1; ++b) {
          const Index rr = r + a * dilations[di];
          const Index cc = col + b * dilations[di];
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) {
            continue;
          }
          for (Index c = 0; c < v.cols(); ++c) {
            coeff(rr * cols + cc, c) += weights[di](3 * (a + 1) + (b + 1), c);
          }
        }
      }
    }
    for (Index m = 0; m < n_tokens; ++m) {
      for (Index c = 0; c < v.cols(); ++c) {
        out(n, m) += std::abs(coeff(m, c) * v(m, c));
      }
    }
  }
  return out;
}

struct RowStats {
  std::vector<double> histogram;
  double mu = 0.0;
  double entropy = 0.0;
};

/// Enumerates each row of a nonnegative score map separately.
inline RowStats per_row_stats(const RowMatrix& scores, Index rows, Index cols) {
  const Index n = scores.rows();
  RowStats st;
  st.histogram.assign(static_cast<std::size_t>(rows + cols - 1), 0.0);
  int used = 0;
  for (Index i = 0; i < n; ++i) {
    double z = 0.0;
    for (Index j = 0; j < n; ++j) {
      z += scores(i, j);
    }
    if (z == 0.0) {
      continue;
    }
    ++used;
    for (Index j = 0; j < n; ++j) {
      const Index dist = std::abs(i / cols - j / cols) + std::abs(i % cols - j % cols);
      const double p = scores(i, j) / z;
      st.histogram[static_cast<std::size_t>(dist)] += p;
      st.mu += p * static_cast<double>(dist);
      if (p > 0.0) {
        st.entropy -= p * std::log(p);
      }
    }
  }
  for (double& h : st.histogram) {
    h /= used;
  }
  st.mu /= used;
  st.entropy /= used;
  return st;
}

struct ScalarLif {
  double v_th = 1.0;
  double v_reset = 0.0;
  double tau = 0.5;
  double h = 0.0;

  /// Returns the spike and leaves the next pre-synaptic potential in h.
  int step(double input) {
    const double u = h + input;
    if (u >= v_th) {
      h = v_reset;
      return 1;
    }
    h = tau * u;
    return 0;
  }
};

}  // namespace lrf::oracle
