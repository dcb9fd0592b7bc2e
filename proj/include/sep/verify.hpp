#pragma once

// Scenario runners behind `verify` and the acceptance suite: each check
// returns a pass/fail result with detail lines, so the CLI and the test
// binary share one implementation.

#include <cstdint>
#include <string>
#include <vector>

namespace sep::verify {

struct Options {
  std::uint64_t seed = 1;
  int jobs = 2;
  // Scenario overrides (0 / negative means "use the pinned default").
  double t = 0;
  std::int64_t replicas = 0;
  int depth = 0;
  int level = 0;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;
  double seconds = 0.0;
};

// Acceptance criteria, numbered 1..11.
CheckResult pair_stability_equivalence(const Options& opts);   // 1
CheckResult rayleigh_preservation(const Options& opts);        // 2
CheckResult exact_vs_monte_carlo(const Options& opts);         // 3
CheckResult duality_one_point(const Options& opts);            // 4
CheckResult count_law_invariance(const Options& opts);         // 5
CheckResult covariance_formula(const Options& opts);           // 6
CheckResult paper_constants(const Options& opts);              // 7
CheckResult variance_envelope(const Options& opts);            // 8
CheckResult flux_clt(const Options& opts);                     // 9
CheckResult h_constant_check(const Options& opts);             // 10
CheckResult poisson_window_limit(const Options& opts);         // 11

CheckResult run_criterion(int id, const Options& opts);
int criterion_count();

}  // namespace sep::verify
