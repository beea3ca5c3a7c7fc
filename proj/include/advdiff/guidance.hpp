#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "advdiff/diffusion.hpp"
#include "advdiff/interfaces.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/schedule.hpp"

namespace advdiff {

// Scaling convention for the between-restart noise update. The DDPM
// listing scales the gradient by sigma_bar_T^2 while the DDIM listing
// does not; kPerAlgorithm follows each listing, the other two values
// force one convention for both samplers.
enum class NoiseGuidanceScale {
  kPerAlgorithm,
  kWithSigmaBar,
  kWithoutSigmaBar,
};

struct GuidanceConfig {
  double w = 1.0;                // classification guidance weight
  double s = 0.5;                // per-step adversarial guidance scale
  double a = 1.0;                // noise sampling guidance scale
  std::size_t restarts = 10;     // noise sampling guidance steps (N)
  double t_star = 0.5;           // per-step guidance active for t <= t_star*T
  std::size_t ddim_steps = 50;   // strided steps for the DDIM sampler
  NoiseGuidanceScale noise_scale = NoiseGuidanceScale::kPerAlgorithm;
  bool record_trajectory = false;
};

// Paper presets: the small-image settings (w=1, s=0.5, a=1.0, N=10, 500
// DDPM steps) and the large-image settings (s=0.7, a=0.5, N=5, 200 DDIM
// steps).
GuidanceConfig mnist_paper_preset();
GuidanceConfig imagenet_paper_preset();

// What to attack: generate class `label`, fool `classifier`. A present
// `target` selects targeted mode (succeed when f(x0) == target, target !=
// label); absent means untargeted (succeed when f(x0) != label).
struct AttackSpec {
  std::size_t label = 0;
  std::optional<std::size_t> target;
  const Classifier* classifier = nullptr;

  bool targeted() const { return target.has_value(); }
};

struct AttackResult {
  Tensor x_final;  // last successful x0, or the last restart's x0 on failure
  bool success = false;
  std::optional<std::size_t> first_success_restart;  // 0-based
  std::vector<std::size_t> verdicts;  // classifier verdict per restart
  std::vector<Tensor> trajectory;     // per guided step, restart-major
};

// True when per-step guidance applies at timestep t.
bool guidance_active(std::size_t t, double t_star, std::size_t timesteps);

// Shifts a benign reverse-step output along the classifier gradient:
// targeted   x + sigma[t]^2 s d log p(y_a|x)/dx
// untargeted x - sigma[t]^2 s d log p(y|x)/dx
// Returns x unchanged (bitwise) when s == 0 or t > t_star*T.
Tensor adversarial_guidance_step(const Tensor& x_prev, std::size_t t,
                                 const AttackSpec& spec, double s,
                                 double t_star, const NoiseSchedule& sched);

// Between-restart update of the initial noise from the finished sample:
// x_T +- [sigma_bar_T^2] a d log p(.|x0)/dx0, sign and label as above.
Tensor noise_guidance_update(const Tensor& x_T, const Tensor& x0,
                             const AttackSpec& spec, double a,
                             const NoiseSchedule& sched, bool with_sigma_bar);

// Benign classifier-free samplers. Draw order is one normal tensor for
// x_T, then one per step with t > 1 (DDPM only), which the attack loops
// reproduce exactly so that s=0, a=0, N=1 matches them bitwise on a
// shared stream.
Tensor sample_ddpm(const Denoiser& den, Label y, double w,
                   const NoiseSchedule& sched, RngStream& rng);
Tensor sample_ddim(const Denoiser& den, Label y, double w,
                   const NoiseSchedule& sched, std::size_t steps,
                   RngStream& rng);
Tensor sample_ddim_from(const Denoiser& den, Label y, double w,
                        const NoiseSchedule& sched, std::size_t steps,
                        const Tensor& x_T);

// Descending stride grid T = t[steps] > ... > t[0] = 0.
std::vector<std::size_t> ddim_time_grid(std::size_t timesteps,
                                        std::size_t steps);

// Full attack loops: N restarts of the guided reverse chain, classifying
// each restart's x0, updating x_T between restarts and keeping the last
// success. The evolving x_T persists across restarts of one attack.
AttackResult advdiff_ddpm(const Denoiser& den, const AttackSpec& spec,
                          const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, RngStream& rng);
AttackResult advdiff_ddim(const Denoiser& den, const AttackSpec& spec,
                          const GuidanceConfig& cfg,
                          const NoiseSchedule& sched, RngStream& rng);
// DDIM variant with a caller-provided initial noise (the chain is then
// fully deterministic).
AttackResult advdiff_ddim_from(const Denoiser& den, const AttackSpec& spec,
                               const GuidanceConfig& cfg,
                               const NoiseSchedule& sched, const Tensor& x_T);

}  // namespace advdiff
