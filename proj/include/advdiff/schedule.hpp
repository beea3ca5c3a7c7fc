#pragma once

#include <cstddef>
#include <vector>

namespace advdiff {

// Diffusion constants for T timesteps, indexed 1..T (index 0 is the
// clean-data endpoint: alpha_bar[0] == 1 so steps to t=0 need no special
// case). alpha_bar is strictly decreasing and sigma_bar_T_sq = 1 -
// alpha_bar[T] is the marginal noise variance at the last step.
struct NoiseSchedule {
  std::size_t timesteps = 0;
  std::vector<double> beta;       // beta[0] unused
  std::vector<double> alpha;      // 1 - beta[t]
  std::vector<double> alpha_bar;  // prod_{i<=t} alpha[i], alpha_bar[0] = 1
  std::vector<double> sigma;      // reverse-step stddev, sqrt(beta[t])
  double sigma_bar_T_sq = 0.0;
};

enum class ScheduleKind { kLinear };

// beta interpolated linearly from beta_start to beta_end inclusive.
NoiseSchedule make_schedule(ScheduleKind kind, std::size_t timesteps,
                            double beta_start, double beta_end);

}  // namespace advdiff
