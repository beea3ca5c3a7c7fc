#include "advdiff/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace advdiff {

namespace {

MlpArch denoiser_mlp_arch(const DenoiserArch& arch) {
  return MlpArch{arch.input_dim(), arch.data_dim, arch.hidden};
}

MlpArch classifier_mlp_arch(const ClassifierArch& arch) {
  return MlpArch{arch.data_dim, arch.classes, arch.hidden};
}

void check_label(Label y, std::size_t classes) {
  if (y.has_value() && *y >= classes) {
    throw std::invalid_argument("label " + std::to_string(*y) +
                                " out of range for " +
                                std::to_string(classes) + " classes");
  }
}

}  // namespace

DenoiserParams make_denoiser(const DenoiserArch& arch, RngStream& rng) {
  if (arch.time_features % 2 != 0) {
    throw std::invalid_argument("denoiser: time_features must be even");
  }
  DenoiserParams p;
  p.arch = arch;
  p.label_table = Tensor::zeros({arch.classes + 1, arch.label_embed});
  for (std::size_t i = 0; i < p.label_table.size(); ++i) {
    p.label_table[i] = 0.5 * rng.normal();
  }
  p.mlp = make_mlp(denoiser_mlp_arch(arch), rng);
  return p;
}

DenoiserParams make_zero_denoiser(const DenoiserArch& arch) {
  DenoiserParams p;
  p.arch = arch;
  p.label_table = Tensor::zeros({arch.classes + 1, arch.label_embed});
  p.mlp = make_zero_mlp(denoiser_mlp_arch(arch));
  return p;
}

ClassifierParams make_classifier(const ClassifierArch& arch, RngStream& rng) {
  ClassifierParams p;
  p.arch = arch;
  p.mlp = make_mlp(classifier_mlp_arch(arch), rng);
  return p;
}

ClassifierParams make_zero_classifier(const ClassifierArch& arch) {
  ClassifierParams p;
  p.arch = arch;
  p.mlp = make_zero_mlp(classifier_mlp_arch(arch));
  return p;
}

Tensor sinusoidal_features(std::size_t t, std::size_t timesteps,
                           std::size_t count) {
  if (count % 2 != 0) {
    throw std::invalid_argument("sinusoidal_features: count must be even");
  }
  const double tau =
      static_cast<double>(t) / static_cast<double>(timesteps);
  Tensor out = Tensor::zeros({count});
  double freq = 1.0;
  for (std::size_t j = 0; j < count / 2; ++j) {
    const double arg = 2.0 * std::numbers::pi * freq * tau;
    out[2 * j] = std::sin(arg);
    out[2 * j + 1] = std::cos(arg);
    freq *= 2.0;
  }
  return out;
}

Tensor denoiser_forward(const DenoiserParams& p, const Tensor& x_t,
                        std::size_t t, Label y) {
  const DenoiserArch& a = p.arch;
  check_label(y, a.classes);
  if (x_t.size() != a.data_dim) {
    throw std::invalid_argument("denoiser_forward: input width mismatch");
  }
  if (t < 1 || t > a.timesteps) {
    throw std::invalid_argument("denoiser_forward: timestep out of range");
  }
  const Tensor tf = sinusoidal_features(t, a.timesteps, a.time_features);
  const std::size_t row = y.has_value() ? *y : a.classes;

  Tensor in = Tensor::zeros({a.input_dim()});
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.data_dim; ++i) in[k++] = x_t[i];
  for (std::size_t i = 0; i < a.time_features; ++i) in[k++] = tf[i];
  for (std::size_t i = 0; i < a.label_embed; ++i) {
    in[k++] = p.label_table.at(row, i);
  }
  return mlp_forward(p.mlp, in);
}

Tensor classifier_logits(const ClassifierParams& p, const Tensor& x) {
  if (x.size() != p.arch.data_dim) {
    throw std::invalid_argument("classifier: input width mismatch");
  }
  return mlp_forward(p.mlp, x);
}

Tensor classifier_logprob(const ClassifierParams& p, const Tensor& x) {
  return log_softmax_stable(classifier_logits(p, x));
}

Tensor classifier_input_grad(const ClassifierParams& p, const Tensor& x,
                             std::size_t y) {
  if (y >= p.arch.classes) {
    throw std::invalid_argument("classifier_input_grad: label out of range");
  }
  MlpTrace trace;
  const Tensor logits = mlp_forward_trace(p.mlp, x, trace);
  // d log p(y)/d logits = onehot(y) - softmax(logits)
  Tensor dlogits = softmax_stable(logits);
  for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits[i] = -dlogits[i];
  dlogits[y] += 1.0;
  return mlp_input_grad_from_trace(p.mlp, trace, x, dlogits);
}

std::size_t classifier_predict(const ClassifierParams& p, const Tensor& x) {
  return argmax(classifier_logits(p, x));
}

std::size_t Classifier::predict(const Tensor& x) const {
  return argmax(log_probs(x));
}

}  // namespace advdiff
