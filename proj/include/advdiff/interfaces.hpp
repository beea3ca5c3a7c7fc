#pragma once

#include <cstddef>
#include <optional>

#include "advdiff/tensor.hpp"

namespace advdiff {

// Class label, or nullopt for the unconditional branch.
using Label = std::optional<std::size_t>;
inline constexpr std::nullopt_t kNullLabel = std::nullopt;

// Target model interface: log-probabilities and their input gradient.
// Implementations must be pure (safe to share across threads).
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t num_classes() const = 0;
  virtual Tensor log_probs(const Tensor& x) const = 0;
  // d log p(y|x) / dx, exact
  virtual Tensor log_prob_grad(const Tensor& x, std::size_t y) const = 0;

  std::size_t predict(const Tensor& x) const;  // argmax, first max wins
};

// Noise-prediction interface shared by the trained network and the
// closed-form oracle.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::size_t data_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Tensor epsilon(const Tensor& x_t, std::size_t t, Label y) const = 0;
};

}  // namespace advdiff
