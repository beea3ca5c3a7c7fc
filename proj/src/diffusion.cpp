#include "advdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advdiff {

namespace {

void require_timestep(std::size_t t, const NoiseSchedule& sched,
                      const char* where) {
  if (t < 1 || t > sched.timesteps) {
    throw std::invalid_argument(std::string(where) + ": timestep " +
                                std::to_string(t) + " outside [1," +
                                std::to_string(sched.timesteps) + "]");
  }
}

}  // namespace

Tensor forward_marginal(const Tensor& x0, std::size_t t, const Tensor& eps,
                        const NoiseSchedule& sched) {
  require_timestep(t, sched, "forward_marginal");
  require_same_shape(x0, eps, "forward_marginal");
  const double ab = sched.alpha_bar[t];
  const double c0 = std::sqrt(ab);
  const double ce = std::sqrt(1.0 - ab);
  Tensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c0 * x0[i] + ce * eps[i];
  }
  return out;
}

Tensor forward_step(const Tensor& x_prev, std::size_t t, const Tensor& eps,
                    const NoiseSchedule& sched) {
  require_timestep(t, sched, "forward_step");
  require_same_shape(x_prev, eps, "forward_step");
  const double c0 = std::sqrt(1.0 - sched.beta[t]);
  const double ce = std::sqrt(sched.beta[t]);
  Tensor out = x_prev;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c0 * x_prev[i] + ce * eps[i];
  }
  return out;
}

Tensor cfg_epsilon(const Tensor& eps_cond, const Tensor& eps_uncond,
                   double w) {
  require_same_shape(eps_cond, eps_uncond, "cfg_epsilon");
  Tensor out = eps_cond;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 + w) * eps_cond[i] - w * eps_uncond[i];
  }
  return out;
}

Tensor ddpm_mean(const Tensor& x_t, std::size_t t, const Tensor& eps_hat,
                 const NoiseSchedule& sched) {
  require_timestep(t, sched, "ddpm_mean");
  require_same_shape(x_t, eps_hat, "ddpm_mean");
  const double k = sched.beta[t] / std::sqrt(1.0 - sched.alpha_bar[t]);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[t]);
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (x_t[i] - k * eps_hat[i]) * inv_sqrt_alpha;
  }
  return out;
}

Tensor ddpm_step(const Tensor& x_t, std::size_t t, const Tensor& eps_hat,
                 const NoiseSchedule& sched, const Tensor& z) {
  require_same_shape(x_t, z, "ddpm_step");
  Tensor out = ddpm_mean(x_t, t, eps_hat, sched);
  const double s = sched.sigma[t];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * z[i];
  return out;
}

Tensor ddim_step(const Tensor& x_t, std::size_t t, std::size_t t_prev,
                 const Tensor& eps_hat, const NoiseSchedule& sched) {
  require_timestep(t, sched, "ddim_step");
  if (t_prev >= t) {
    throw std::invalid_argument("ddim_step: t_prev must be < t");
  }
  require_same_shape(x_t, eps_hat, "ddim_step");
  const double ab_t = sched.alpha_bar[t];
  const double ab_prev = sched.alpha_bar[t_prev];
  const double c_x0 = std::sqrt(ab_prev / ab_t);
  const double c_eps =
      std::sqrt(1.0 - ab_prev) - std::sqrt(ab_prev / ab_t) * std::sqrt(1.0 - ab_t);
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c_x0 * x_t[i] + c_eps * eps_hat[i];
  }
  return out;
}

Tensor classifier_guided_epsilon(const Tensor& eps_hat, const Tensor& x_t,
                                 const Classifier& classifier, std::size_t y,
                                 std::size_t t, const NoiseSchedule& sched,
                                 double scale) {
  require_timestep(t, sched, "classifier_guided_epsilon");
  if (scale == 0.0) return eps_hat;
  const Tensor g = classifier.log_prob_grad(x_t, y);
  require_same_shape(eps_hat, g, "classifier_guided_epsilon");
  const double k = std::sqrt(1.0 - sched.alpha_bar[t]) * scale;
  Tensor out = eps_hat;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= k * g[i];
  return out;
}

}  // namespace advdiff
