#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advdiff/interfaces.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/schedule.hpp"
#include "advdiff/tensor.hpp"

namespace advdiff {

struct LabeledSample {
  Tensor x;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<Tensor> centers;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  std::size_t classes() const { return centers.size(); }
  std::size_t dim() const { return centers.empty() ? 0 : centers[0].size(); }
};

// K isotropic Gaussians with spread gamma, centered on a radius-r circle
// (class k at angle 2*pi*k/K). Deterministic under the seed.
Dataset make_ring_mixture(std::size_t classes, std::size_t per_class,
                          double radius, double gamma, std::uint64_t seed);

// x columns then label; import recovers samples and estimates centers as
// the per-class means (gamma is not stored in the CSV).
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

std::size_t nearest_center(const std::vector<Tensor>& centers,
                           const Tensor& x);

// Closed-form optimal noise predictor for Gaussian class-conditional data
// x0 ~ N(c_y, gamma^2 I):
//
//   eps(x_t, t, y) = sqrt(1-ab) (x_t - sqrt(ab) c_y) / (ab g^2 + 1 - ab)
//
// with ab = alpha_bar[t]. The unconditional branch mixes the per-class
// predictions with the exact posterior weights of x_t under each class
// marginal.
class AnalyticDenoiser final : public Denoiser {
 public:
  AnalyticDenoiser(std::vector<Tensor> centers, double gamma,
                   NoiseSchedule sched);

  std::size_t data_dim() const override { return centers_[0].size(); }
  std::size_t num_classes() const override { return centers_.size(); }
  Tensor epsilon(const Tensor& x_t, std::size_t t, Label y) const override;

  const std::vector<Tensor>& centers() const { return centers_; }
  double gamma() const { return gamma_; }
  const NoiseSchedule& schedule() const { return sched_; }

 private:
  std::vector<Tensor> centers_;
  double gamma_;
  NoiseSchedule sched_;
};

Tensor analytic_epsilon(const AnalyticDenoiser& d, const Tensor& x_t,
                        std::size_t t, Label y);

// Softmax over logits_k = -|x - c_k|^2 / (2 tau); log p gradients are
// hand-derived, giving an oracle independent of the tape.
class QuadraticClassifier final : public Classifier {
 public:
  QuadraticClassifier(std::vector<Tensor> centers, double tau);

  std::size_t num_classes() const override { return centers_.size(); }
  Tensor logits(const Tensor& x) const;
  Tensor log_probs(const Tensor& x) const override;
  Tensor log_prob_grad(const Tensor& x, std::size_t y) const override;

  const std::vector<Tensor>& centers() const { return centers_; }
  double tau() const { return tau_; }

 private:
  std::vector<Tensor> centers_;
  double tau_;
};

// (-(x-c_y) + sum_k softmax_k(x) (x-c_k)) / tau
Tensor quadratic_logprob_grad(const QuadraticClassifier& q, const Tensor& x,
                              std::size_t y);

// Nearest-center decision rule as a Classifier (a unit-temperature
// quadratic classifier has exactly that argmax).
QuadraticClassifier nearest_center_oracle(std::vector<Tensor> centers);

}  // namespace advdiff
