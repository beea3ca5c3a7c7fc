#pragma once

#include "advdiff/interfaces.hpp"
#include "advdiff/schedule.hpp"
#include "advdiff/tensor.hpp"

namespace advdiff {

// Current iterate of a reverse chain.
struct SampleState {
  Tensor x;
  std::size_t t = 0;
  Label y;
};

// sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps, the closed-form
// noising marginal; eps is the caller's standard-normal draw.
Tensor forward_marginal(const Tensor& x0, std::size_t t, const Tensor& eps,
                        const NoiseSchedule& sched);

// One draw of the stepwise noising kernel, sqrt(1-beta[t]) x_{t-1} +
// sqrt(beta[t]) eps. Composing these matches forward_marginal in
// distribution.
Tensor forward_step(const Tensor& x_prev, std::size_t t, const Tensor& eps,
                    const NoiseSchedule& sched);

// (1+w) eps_cond - w eps_uncond. w=0 is conditioning only, w=-1 the
// unconditional limit.
Tensor cfg_epsilon(const Tensor& eps_cond, const Tensor& eps_uncond, double w);

// Posterior mean (x_t - beta[t]/sqrt(1-alpha_bar[t]) eps_hat) / sqrt(alpha[t]).
Tensor ddpm_mean(const Tensor& x_t, std::size_t t, const Tensor& eps_hat,
                 const NoiseSchedule& sched);

// mean + sigma[t] z; callers pass z = 0 at t = 1.
Tensor ddpm_step(const Tensor& x_t, std::size_t t, const Tensor& eps_hat,
                 const NoiseSchedule& sched, const Tensor& z);

// Deterministic (eta = 0) update to t_prev < t; alpha_bar[0] = 1 makes
// t_prev = 0 the final denoised sample.
Tensor ddim_step(const Tensor& x_t, std::size_t t, std::size_t t_prev,
                 const Tensor& eps_hat, const NoiseSchedule& sched);

// eps_hat - sqrt(1-alpha_bar[t]) * scale * d log p(y|x_t) / dx_t.
// Negative scale flips the push away from y.
Tensor classifier_guided_epsilon(const Tensor& eps_hat, const Tensor& x_t,
                                 const Classifier& classifier, std::size_t y,
                                 std::size_t t, const NoiseSchedule& sched,
                                 double scale);

}  // namespace advdiff
