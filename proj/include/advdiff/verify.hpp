#pragma once

#include <string>
#include <vector>

namespace advdiff {

struct VerifyOptions {
  double tol_scale = 1.0;  // multiplies every tolerance
  // test hook: applies a sign defect to the per-step guidance inside the
  // one-step-law check, which must then fail
  bool mutate_guidance_sign = false;
  std::vector<std::string> only;  // run just these checks when non-empty
};

struct CheckResult {
  std::string name;
  bool monte_carlo = false;  // statistical check (z-score scaled) vs exact
  double measured = 0.0;
  double tolerance = 0.0;  // after tol_scale
  bool pass = false;
  double seconds = 0.0;
};

// Self-contained: analytic oracles only, no checkpoints. Deterministic
// seeds, so a passing build keeps passing.
std::vector<CheckResult> run_verify_checks(const VerifyOptions& options);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace advdiff
