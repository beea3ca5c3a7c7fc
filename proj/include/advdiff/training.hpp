#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advdiff/data.hpp"
#include "advdiff/models.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/schedule.hpp"

namespace advdiff {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 128;
  double lr = 0.05;
  double p_uncond = 0.1;  // label-dropout rate for the denoiser
  std::uint64_t seed = 0;
};

struct PgdConfig {
  double epsilon = 0.6;      // L-inf budget
  double step_size = 0.075;
  std::size_t steps = 20;
  bool random_start = true;
};

struct TrainCurvePoint {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = -1.0;  // < 0 when not applicable
};

using EpsilonFn =
    std::function<Tensor(const Tensor& x_t, std::size_t t, Label y)>;

// Monte-Carlo denoising objective: mean over the batch of
// |eps - model(x_t, t, y')|^2 with t uniform in [1,T], eps standard
// normal, x_t the forward marginal, and y' dropped to the null label
// with probability p_uncond.
double ddpm_loss(const EpsilonFn& eps_model,
                 std::span<const LabeledSample> batch,
                 const NoiseSchedule& sched, RngStream& rng, double p_uncond);
double ddpm_loss(const DenoiserParams& params,
                 std::span<const LabeledSample> batch,
                 const NoiseSchedule& sched, RngStream& rng, double p_uncond);

// Plain SGD training runs, bit-reproducible under a fixed seed. A
// non-finite loss aborts with a TrainingError naming the epoch.
DenoiserParams train_denoiser(const TrainConfig& config, const Dataset& data,
                              const NoiseSchedule& sched,
                              std::vector<TrainCurvePoint>* curve = nullptr);
ClassifierParams train_classifier(const TrainConfig& config,
                                  const Dataset& data,
                                  std::vector<TrainCurvePoint>* curve = nullptr);

// L-inf projected gradient ascent on the cross-entropy of (x, y);
// epsilon=0 returns x unchanged and draws nothing from rng.
Tensor pgd_attack(const ClassifierParams& f, const Tensor& x, std::size_t y,
                  const PgdConfig& cfg, RngStream& rng);

// Training where each minibatch is replaced by its PGD perturbation
// before the gradient step. With epsilon=0 this reduces to
// train_classifier exactly (same trajectory under the same seed).
ClassifierParams adversarial_train(const TrainConfig& config,
                                   const PgdConfig& pgd, const Dataset& data,
                                   std::vector<TrainCurvePoint>* curve = nullptr);

double classifier_accuracy(const ClassifierParams& p,
                           std::span<const LabeledSample> samples);
// Fraction of samples whose PGD perturbation flips the prediction away
// from the true label.
double pgd_misclassification_rate(const ClassifierParams& p,
                                  std::span<const LabeledSample> samples,
                                  const PgdConfig& cfg, RngStream& rng);

void write_curve_csv(const std::string& path,
                     std::span<const TrainCurvePoint> curve);

}  // namespace advdiff
