#include "advdiff/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

void validate(const AttackSpec& spec, const GuidanceConfig& cfg,
              const Denoiser& den) {
  if (spec.classifier == nullptr) {
    throw std::invalid_argument("attack: no target classifier");
  }
  const std::size_t k = spec.classifier->num_classes();
  if (spec.label >= k) {
    throw std::invalid_argument("attack: generation label out of range");
  }
  if (spec.targeted()) {
    if (*spec.target >= k) {
      throw std::invalid_argument("attack: target label out of range");
    }
    if (*spec.target == spec.label) {
      throw std::invalid_argument(
          "attack: targeted mode needs target != generation label");
    }
  }
  if (cfg.s < 0 || cfg.a < 0) {
    throw std::invalid_argument("attack: guidance scales must be >= 0");
  }
  if (cfg.restarts < 1) {
    throw std::invalid_argument("attack: restarts must be >= 1");
  }
  if (cfg.t_star < 0 || cfg.t_star > 1) {
    throw std::invalid_argument("attack: t_star must lie in [0,1]");
  }
  if (den.num_classes() != k) {
    throw std::invalid_argument(
        "attack: denoiser and classifier class counts differ");
  }
}

bool objective_met(const AttackSpec& spec, std::size_t verdict) {
  return spec.targeted() ? verdict == *spec.target : verdict != spec.label;
}

Tensor cfg_prediction(const Denoiser& den, const Tensor& x, std::size_t t,
                      std::size_t label, double w) {
  Tensor eps_cond = den.epsilon(x, t, label);
  if (w == 0.0) return eps_cond;
  return cfg_epsilon(eps_cond, den.epsilon(x, t, kNullLabel), w);
}

void check_chain_finite(const Tensor& x, std::size_t restart, std::size_t t) {
  if (!x.all_finite()) {
    throw SamplingError("sample diverged at restart " +
                        std::to_string(restart) + ", timestep " +
                        std::to_string(t));
  }
}

}  // namespace

GuidanceConfig mnist_paper_preset() {
  GuidanceConfig cfg;
  cfg.w = 1.0;
  cfg.s = 0.5;
  cfg.a = 1.0;
  cfg.restarts = 10;
  cfg.t_star = 0.5;
  return cfg;
}

GuidanceConfig imagenet_paper_preset() {
  GuidanceConfig cfg;
  cfg.w = 1.0;
  cfg.s = 0.7;
  cfg.a = 0.5;
  cfg.restarts = 5;
  cfg.t_star = 0.5;
  cfg.ddim_steps = 200;
  return cfg;
}

bool guidance_active(std::size_t t, double t_star, std::size_t timesteps) {
  return static_cast<double>(t) <= t_star * static_cast<double>(timesteps);
}

Tensor adversarial_guidance_step(const Tensor& x_prev, std::size_t t,
                                 const AttackSpec& spec, double s,
                                 double t_star, const NoiseSchedule& sched) {
  if (s == 0.0) return x_prev;
  if (!guidance_active(t, t_star, sched.timesteps)) return x_prev;
  const double sig2 = sched.sigma[t] * sched.sigma[t];
  if (spec.targeted()) {
    const Tensor g = spec.classifier->log_prob_grad(x_prev, *spec.target);
    return axpy(sig2 * s, g, x_prev);
  }
  const Tensor g = spec.classifier->log_prob_grad(x_prev, spec.label);
  return axpy(-sig2 * s, g, x_prev);
}

Tensor noise_guidance_update(const Tensor& x_T, const Tensor& x0,
                             const AttackSpec& spec, double a,
                             const NoiseSchedule& sched, bool with_sigma_bar) {
  if (a == 0.0) return x_T;
  const double base = with_sigma_bar ? sched.sigma_bar_T_sq : 1.0;
  if (spec.targeted()) {
    const Tensor g = spec.classifier->log_prob_grad(x0, *spec.target);
    return axpy(base * a, g, x_T);
  }
  const Tensor g = spec.classifier->log_prob_grad(x0, spec.label);
  return axpy(-base * a, g, x_T);
}

Tensor sample_ddpm(const Denoiser& den, Label y, double w,
                   const NoiseSchedule& sched, RngStream& rng) {
  const std::size_t d = den.data_dim();
  Tensor x = rng.normal_tensor({d});
  const Tensor zero = Tensor::zeros({d});
  for (std::size_t t = sched.timesteps; t > 0; --t) {
    const Tensor eps_hat = y.has_value()
                               ? cfg_prediction(den, x, t, *y, w)
                               : den.epsilon(x, t, kNullLabel);
    const Tensor z = t > 1 ? rng.normal_tensor({d}) : zero;
    x = ddpm_step(x, t, eps_hat, sched, z);
  }
  return x;
}

std::vector<std::size_t> ddim_time_grid(std::size_t timesteps,
                                        std::size_t steps) {
  if (steps < 1 || steps > timesteps) {
    throw std::invalid_argument("ddim: steps must lie in [1,timesteps]");
  }
  std::vector<std::size_t> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = static_cast<std::size_t>(std::llround(
        static_cast<double>(timesteps) * static_cast<double>(k) /
        static_cast<double>(steps)));
  }
  return grid;
}

Tensor sample_ddim_from(const Denoiser& den, Label y, double w,
                        const NoiseSchedule& sched, std::size_t steps,
                        const Tensor& x_T) {
  const auto grid = ddim_time_grid(sched.timesteps, steps);
  Tensor x = x_T;
  for (std::size_t k = steps; k > 0; --k) {
    const std::size_t t = grid[k];
    const Tensor eps_hat = y.has_value()
                               ? cfg_prediction(den, x, t, *y, w)
                               : den.epsilon(x, t, kNullLabel);
    x = ddim_step(x, t, grid[k - 1], eps_hat, sched);
  }
  return x;
}

Tensor sample_ddim(const Denoiser& den, Label y, double w,
                   const NoiseSchedule& sched, std::size_t steps,
                   RngStream& rng) {
  return sample_ddim_from(den, y, w, sched, steps,
                          rng.normal_tensor({den.data_dim()}));
}

namespace {

AttackResult run_advdiff_ddpm(const Denoiser& den, const AttackSpec& spec,
                              const GuidanceConfig& cfg,
                              const NoiseSchedule& sched, Tensor x_T,
                              RngStream& rng) {
  validate(spec, cfg, den);
  const std::size_t d = den.data_dim();
  const bool with_sigma_bar =
      cfg.noise_scale != NoiseGuidanceScale::kWithoutSigmaBar;
  const Tensor zero = Tensor::zeros({d});

  AttackResult res;
  Tensor last_x0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Tensor x = x_T;
    for (std::size_t t = sched.timesteps; t > 0; --t) {
      const Tensor eps_hat = cfg_prediction(den, x, t, spec.label, cfg.w);
      const Tensor z = t > 1 ? rng.normal_tensor({d}) : zero;
      x = ddpm_step(x, t, eps_hat, sched, z);
      x = adversarial_guidance_step(x, t, spec, cfg.s, cfg.t_star, sched);
      check_chain_finite(x, r, t);
      if (cfg.record_trajectory) res.trajectory.push_back(x);
    }
    const std::size_t verdict = spec.classifier->predict(x);
    res.verdicts.push_back(verdict);
    if (objective_met(spec, verdict)) {
      res.success = true;
      if (!res.first_success_restart) res.first_success_restart = r;
      res.x_final = x;
    }
    last_x0 = std::move(x);
    x_T = noise_guidance_update(x_T, last_x0, spec, cfg.a, sched,
                                with_sigma_bar);
  }
  if (!res.success) res.x_final = std::move(last_x0);
  return res;
}

}  // namespace

AttackResult advdiff_ddpm(const Denoiser& den, const AttackSpec& spec,
                          const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, RngStream& rng) {
  Tensor x_T = rng.normal_tensor({den.data_dim()});
  return run_advdiff_ddpm(den, spec, cfg, sched, std::move(x_T), rng);
}

AttackResult advdiff_ddim_from(const Denoiser& den, const AttackSpec& spec,
                               const GuidanceConfig& cfg,
                               const NoiseSchedule& sched,
                               const Tensor& x_T_init) {
  validate(spec, cfg, den);
  const bool with_sigma_bar =
      cfg.noise_scale == NoiseGuidanceScale::kWithSigmaBar;
  const auto grid = ddim_time_grid(sched.timesteps, cfg.ddim_steps);
  // epsilon-space guidance label and sign: push toward the target, or
  // away from the generation label in untargeted mode
  const std::size_t guide_label =
      spec.targeted() ? *spec.target : spec.label;
  const double guide_scale = spec.targeted() ? cfg.s : -cfg.s;

  AttackResult res;
  Tensor x_T = x_T_init;
  Tensor last_x0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Tensor x = x_T;
    for (std::size_t k = cfg.ddim_steps; k > 0; --k) {
      const std::size_t t = grid[k];
      Tensor eps_hat = cfg_prediction(den, x, t, spec.label, cfg.w);
      if (cfg.s != 0.0 && guidance_active(t, cfg.t_star, sched.timesteps)) {
        eps_hat = classifier_guided_epsilon(eps_hat, x, *spec.classifier,
                                            guide_label, t, sched,
                                            guide_scale);
      }
      x = ddim_step(x, t, grid[k - 1], eps_hat, sched);
      check_chain_finite(x, r, t);
      if (cfg.record_trajectory) res.trajectory.push_back(x);
    }
    const std::size_t verdict = spec.classifier->predict(x);
    res.verdicts.push_back(verdict);
    if (objective_met(spec, verdict)) {
      res.success = true;
      if (!res.first_success_restart) res.first_success_restart = r;
      res.x_final = x;
    }
    last_x0 = std::move(x);
    x_T = noise_guidance_update(x_T, last_x0, spec, cfg.a, sched,
                                with_sigma_bar);
  }
  if (!res.success) res.x_final = std::move(last_x0);
  return res;
}

AttackResult advdiff_ddim(const Denoiser& den, const AttackSpec& spec,
                          const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, RngStream& rng) {
  return advdiff_ddim_from(den, spec, cfg, sched,
                           rng.normal_tensor({den.data_dim()}));
}

}  // namespace advdiff
