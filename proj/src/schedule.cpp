#include "advdiff/schedule.hpp"

#include <cmath>

#include "advdiff/errors.hpp"

namespace advdiff {

NoiseSchedule make_schedule(ScheduleKind kind, std::size_t timesteps,
                            double beta_start, double beta_end) {
  if (kind != ScheduleKind::kLinear) {
    throw ConfigError("schedule: unsupported kind");
  }
  if (timesteps < 1) {
    throw ConfigError("schedule: timesteps must be >= 1");
  }
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }

  NoiseSchedule s;
  s.timesteps = timesteps;
  s.beta.assign(timesteps + 1, 0.0);
  s.alpha.assign(timesteps + 1, 0.0);
  s.alpha_bar.assign(timesteps + 1, 0.0);
  s.sigma.assign(timesteps + 1, 0.0);
  s.alpha_bar[0] = 1.0;

  for (std::size_t t = 1; t <= timesteps; ++t) {
    const double frac =
        timesteps == 1
            ? 0.0
            : static_cast<double>(t - 1) / static_cast<double>(timesteps - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] = std::sqrt(s.beta[t]);
  }
  s.sigma_bar_T_sq = 1.0 - s.alpha_bar[timesteps];
  return s;
}

}  // namespace advdiff
