#pragma once

#include <cstdint>
#include <vector>

#include "advdiff/interfaces.hpp"
#include "advdiff/nn.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/tensor.hpp"

namespace advdiff {

// Conditional noise predictor: an MLP over [x_t | time features | label
// embedding]. The embedding table has one extra row, the learnable null
// label used for the unconditional branch.
struct DenoiserArch {
  std::size_t data_dim = 2;
  std::size_t classes = 8;
  std::size_t timesteps = 500;  // for the t/timesteps encoding
  std::size_t time_features = 16;
  std::size_t label_embed = 8;
  std::vector<std::size_t> hidden{128, 128, 128};

  std::size_t input_dim() const {
    return data_dim + time_features + label_embed;
  }
  bool operator==(const DenoiserArch&) const = default;
};

struct DenoiserParams {
  DenoiserArch arch;
  Tensor label_table;  // (classes+1, label_embed); last row = null label
  MlpParams mlp;       // input_dim() -> data_dim
};

struct ClassifierArch {
  std::size_t data_dim = 2;
  std::size_t classes = 8;
  std::vector<std::size_t> hidden{128, 128, 128};
  bool operator==(const ClassifierArch&) const = default;
};

struct ClassifierParams {
  ClassifierArch arch;
  MlpParams mlp;  // data_dim -> classes logits
};

DenoiserParams make_denoiser(const DenoiserArch& arch, RngStream& rng);
DenoiserParams make_zero_denoiser(const DenoiserArch& arch);
ClassifierParams make_classifier(const ClassifierArch& arch, RngStream& rng);
ClassifierParams make_zero_classifier(const ClassifierArch& arch);

// sin/cos pairs of t/timesteps at octave frequencies; count must be even.
Tensor sinusoidal_features(std::size_t t, std::size_t timesteps,
                           std::size_t count);

// Predicted noise for x_t at timestep t under label y (null = the
// unconditional branch). Deterministic in its inputs.
Tensor denoiser_forward(const DenoiserParams& p, const Tensor& x_t,
                        std::size_t t, Label y);

// Raw logits and stabilized log-probabilities of the target classifier.
Tensor classifier_logits(const ClassifierParams& p, const Tensor& x);
Tensor classifier_logprob(const ClassifierParams& p, const Tensor& x);

// Exact reverse-mode gradient of log p(y|x) with respect to x.
Tensor classifier_input_grad(const ClassifierParams& p, const Tensor& x,
                             std::size_t y);

std::size_t classifier_predict(const ClassifierParams& p, const Tensor& x);

// Interface adapters over frozen parameters (owned by value).
class MlpDenoiser final : public Denoiser {
 public:
  explicit MlpDenoiser(DenoiserParams params) : params_(std::move(params)) {}
  std::size_t data_dim() const override { return params_.arch.data_dim; }
  std::size_t num_classes() const override { return params_.arch.classes; }
  Tensor epsilon(const Tensor& x_t, std::size_t t, Label y) const override {
    return denoiser_forward(params_, x_t, t, y);
  }
  const DenoiserParams& params() const { return params_; }

 private:
  DenoiserParams params_;
};

class MlpClassifier final : public Classifier {
 public:
  explicit MlpClassifier(ClassifierParams params)
      : params_(std::move(params)) {}
  std::size_t num_classes() const override { return params_.arch.classes; }
  Tensor log_probs(const Tensor& x) const override {
    return classifier_logprob(params_, x);
  }
  Tensor log_prob_grad(const Tensor& x, std::size_t y) const override {
    return classifier_input_grad(params_, x, y);
  }
  const ClassifierParams& params() const { return params_; }

 private:
  ClassifierParams params_;
};

}  // namespace advdiff
