#pragma once

#include "lrf/tensor.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lrf {

enum class VerifyScope { all, attention, dyn, analysis, membench };

VerifyScope parse_verify_scope(std::string_view name);
std::string_view to_string(VerifyScope scope);

struct CheckResult {
  std::string name;
  double residual = 0.0;   // worst measured value, compared with `tolerance`
  double tolerance = 0.0;
  bool passed = false;
  int cases_passed = 0;
  int cases_total = 0;
  std::string detail;
};

struct VerifyOptions {
  /// Test fixture: scales one impulse-response tap before the FFT route.
  bool perturb_kernel_tap = false;
};

struct VerifyReport {
  VerifyScope scope = VerifyScope::all;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::vector<std::string> failed_names() const;
};

std::vector<CheckResult> verify_attention(const VerifyOptions& opts = {});
std::vector<CheckResult> verify_dyn(const VerifyOptions& opts = {});
std::vector<CheckResult> verify_analysis(const VerifyOptions& opts = {});
std::vector<CheckResult> verify_membench(const VerifyOptions& opts = {});

VerifyReport run_verify(VerifyScope scope, const VerifyOptions& opts = {});

inline constexpr int kVerifySchemaVersion = 1;
std::string to_json(const VerifyReport& report);

/// Normalized attention mass within Manhattan distance 4 for LRF-SSA and SSA
/// on one random 8 x 8, d = 16 spike input with local weights in [0.1, 1).
struct LocalityTrial {
  double lrf_ssa = 0.0;
  double ssa = 0.0;
};

LocalityTrial locality_trial(std::uint64_t seed);

}  // namespace lrf
