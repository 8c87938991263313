#pragma once

#include "lrf/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lrf {

/// Seeded generator with platform-independent draws. std::mt19937_64 is fully
/// specified by the standard; the distributions below are written out because
/// the std:: ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Deterministic child seed for (seed, stream, index) triples.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t x = seed;
    x = splitmix(x ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    x = splitmix(x ^ (0xbf58476d1ce4e5b9ULL * (index + 1)));
    return x;
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

  RowMatrix normal_matrix(Index rows, Index cols, double stddev = 1.0) {
    RowMatrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = stddev * normal();
    }
    return m;
  }

  RowMatrix uniform_matrix(Index rows, Index cols, double lo, double hi) {
    RowMatrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = uniform(lo, hi);
    }
    return m;
  }

  RowMatrix binary_matrix(Index rows, Index cols, double p) {
    RowMatrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = bernoulli(p) ? 1.0 : 0.0;
    }
    return m;
  }

  SpikeTensor spikes(const Shape4& shape, double p) {
    Tensor t(shape);
    for (Index i = 0; i < t.size(); ++i) {
      t.flat()[i] = bernoulli(p) ? 1.0 : 0.0;
    }
    return SpikeTensor(std::move(t));
  }

  Tensor normal_tensor(const Shape4& shape, double stddev = 1.0) {
    Tensor t(shape);
    for (Index i = 0; i < t.size(); ++i) {
      t.flat()[i] = stddev * normal();
    }
    return t;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lrf
