#pragma once

#include "lrf/attention.hpp"
#include "lrf/dyn.hpp"
#include "lrf/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lrf {

enum class MemMode { ssa_v1, ssa_v2, lrf_ssa_causal, lrf_dyn };

MemMode parse_mem_mode(std::string_view name);
std::string_view to_string(MemMode mode);

/// Live and peak count of real values held by one category of buffers.
class StateCounter {
 public:
  void acquire(std::size_t values) {
    live_ += values;
    peak_ = std::max(peak_, live_);
  }
  void release(std::size_t values) { live_ -= values; }
  std::size_t live() const { return live_; }
  std::size_t peak() const { return peak_; }

 private:
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
};

/// Allocator that reports every allocation to a StateCounter.
template <typename T>
class CountingAllocator {
 public:
  using value_type = T;

  explicit CountingAllocator(StateCounter& counter) : counter_(&counter) {}
  template <typename U>
  CountingAllocator(const CountingAllocator<U>& other) : counter_(other.counter()) {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    counter_->acquire(n);
    return p;
  }
  void deallocate(T* p, std::size_t n) {
    counter_->release(n);
    std::allocator<T>{}.deallocate(p, n);
  }

  StateCounter* counter() const { return counter_; }

  template <typename U>
  bool operator==(const CountingAllocator<U>& other) const {
    return counter_ == other.counter();
  }

 private:
  StateCounter* counter_;
};

using CountedBuffer = std::vector<double, CountingAllocator<double>>;

struct MemProfile {
  MemMode mode = MemMode::ssa_v2;
  Index n = 0;
  Index d = 0;
  Index k = 0;
  Index peak_state_values = 0;    // global aggregation state
  Index local_buffer_values = 0;  // line buffers for the local term
  double batch_residual = 0.0;    // max |streaming - batch| over the outputs
  Index total() const { return peak_state_values + local_buffer_values; }
};

/// Closed forms the counted peaks must reproduce.
Index analytic_state_values(MemMode mode, Index n, Index d, Index k);
Index analytic_local_buffer_values(MemMode mode, const TokenGrid& grid, Index d, Index max_dilation);

/// Inputs for one streaming pass over a single (t, b) slice.
struct StreamInputs {
  RowMatrix q, k, v;  // binary, used by the SSA modes
  RowMatrix tokens;   // used by lrf_dyn
  LrfConfig cfg;
  std::shared_ptr<const DendriticParams> dyn;
};

/// Deterministic random inputs for a mode and configuration.
StreamInputs make_stream_inputs(MemMode mode, Index n, Index d, Index k, const std::vector<Index>& dilations,
                                std::uint64_t seed);

struct StreamResult {
  RowMatrix output;  // streaming outputs in token order
  MemProfile profile;
};

/// Token-by-token streaming evaluation with counted auxiliary storage.
StreamResult run_streaming(MemMode mode, const StreamInputs& inputs, const TokenGrid& grid);

/// The batch implementation of the same mechanism, for comparison.
RowMatrix run_batch(MemMode mode, const StreamInputs& inputs, const TokenGrid& grid);

/// Streams seeded random inputs and records the counted peaks and the residual against batch.
MemProfile profile(MemMode mode, Index n, Index d, Index k, const TokenGrid& grid,
                   const std::vector<Index>& dilations = {3, 5}, std::uint64_t seed = 0);

struct MemSweep {
  std::vector<Index> ns{64};
  std::vector<Index> ds{64};
  Index k = 8;
  std::vector<Index> dilations{3, 5};
  std::uint64_t seed = 0;
};

struct MemRatio {
  MemMode numerator;
  MemMode denominator;
  Index n = 0;
  Index d = 0;
  double ratio = 0.0;  // peak_state_values(numerator) / peak_state_values(denominator)
};

struct CompareReport {
  std::vector<MemProfile> rows;
  std::vector<MemRatio> ratios;
};

CompareReport compare(const std::vector<MemMode>& modes, const MemSweep& sweep);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

inline constexpr int kReportSchemaVersion = 1;

std::string to_json(const CompareReport& report);
std::string to_csv(const CompareReport& report);

}  // namespace lrf
