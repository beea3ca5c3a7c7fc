#include "advdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "advdiff/autodiff.hpp"
#include "advdiff/diffusion.hpp"
#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw TrainingError("train: epochs must be >= 1");
  if (cfg.batch < 1) throw TrainingError("train: batch must be >= 1");
  if (!(cfg.lr > 0)) throw TrainingError("train: learning rate must be > 0");
  if (cfg.p_uncond < 0 || cfg.p_uncond > 1) {
    throw TrainingError("train: p_uncond must lie in [0,1]");
  }
}

void validate(const PgdConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
  if (cfg.epsilon < 0) throw std::invalid_argument("pgd: epsilon must be >= 0");
  if (cfg.epsilon > 0 && cfg.step_size > cfg.epsilon) {
    throw std::invalid_argument("pgd: step size must be <= epsilon");
  }
}

void shuffle(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
}

void check_loss_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw TrainingError("train: loss diverged (non-finite) at epoch " +
                        std::to_string(epoch));
  }
}

}  // namespace

double ddpm_loss(const EpsilonFn& eps_model,
                 std::span<const LabeledSample> batch,
                 const NoiseSchedule& sched, RngStream& rng,
                 double p_uncond) {
  if (batch.empty()) throw TrainingError("ddpm_loss: empty batch");
  double total = 0;
  for (const LabeledSample& s : batch) {
    const std::size_t t = rng.below(sched.timesteps) + 1;
    const Tensor eps = rng.normal_tensor(s.x.shape());
    const Tensor x_t = forward_marginal(s.x, t, eps, sched);
    const Label y =
        rng.uniform01() < p_uncond ? Label(kNullLabel) : Label(s.label);
    const Tensor pred = eps_model(x_t, t, y);
    total += squared_norm(eps - pred);
  }
  return total / static_cast<double>(batch.size());
}

double ddpm_loss(const DenoiserParams& params,
                 std::span<const LabeledSample> batch,
                 const NoiseSchedule& sched, RngStream& rng,
                 double p_uncond) {
  return ddpm_loss(
      [&params](const Tensor& x_t, std::size_t t, Label y) {
        return denoiser_forward(params, x_t, t, y);
      },
      batch, sched, rng, p_uncond);
}

DenoiserParams train_denoiser(const TrainConfig& config, const Dataset& data,
                              const NoiseSchedule& sched,
                              std::vector<TrainCurvePoint>* curve) {
  validate(config);
  if (data.samples.empty()) throw TrainingError("train: empty dataset");

  DenoiserArch arch;
  arch.data_dim = data.dim();
  arch.classes = data.classes();
  arch.timesteps = sched.timesteps;

  RngStream init_rng(config.seed, stream_ids::kModelInit);
  RngStream rng(config.seed, stream_ids::kTraining);
  DenoiserParams params = make_denoiser(arch, init_rng);

  const std::size_t n = data.samples.size();
  const std::size_t d = arch.data_dim;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t b = std::min(config.batch, n - start);

      // constant input block [x_t | time features] plus embedded labels
      Tensor base = Tensor::zeros({b, d + arch.time_features});
      Tensor eps = Tensor::zeros({b, d});
      std::vector<std::size_t> rows(b);
      for (std::size_t i = 0; i < b; ++i) {
        const LabeledSample& s = data.samples[order[start + i]];
        const std::size_t t = rng.below(sched.timesteps) + 1;
        for (std::size_t j = 0; j < d; ++j) eps.at(i, j) = rng.normal();
        const Tensor x_t = forward_marginal(s.x, t, eps.row(i), sched);
        const Tensor tf =
            sinusoidal_features(t, sched.timesteps, arch.time_features);
        for (std::size_t j = 0; j < d; ++j) base.at(i, j) = x_t[j];
        for (std::size_t j = 0; j < arch.time_features; ++j) {
          base.at(i, d + j) = tf[j];
        }
        rows[i] = rng.uniform01() < config.p_uncond ? arch.classes : s.label;
      }

      Tape tape;
      const Var table = tape.input(params.label_table);
      const MlpVars mlp_vars = mlp_to_tape(tape, params.mlp);
      const Var base_var = tape.input(std::move(base));
      const Var emb = tape.embed_rows(table, std::move(rows));
      const Var input = tape.concat_cols(base_var, emb);
      const Var out = mlp_forward_tape(tape, mlp_vars, input);
      const Var eps_var = tape.input(std::move(eps));
      const Var diff = tape.sub(out, eps_var);
      const Var loss = tape.scale(tape.sum(tape.mul(diff, diff)),
                                  1.0 / static_cast<double>(b));
      const double loss_value = tape.scalar(loss);
      check_loss_finite(loss_value, epoch);
      tape.backward(loss);

      mlp_apply_sgd(params.mlp, tape, mlp_vars, config.lr);
      const Tensor& gt = tape.adjoint(table);
      for (std::size_t i = 0; i < params.label_table.size(); ++i) {
        params.label_table[i] -= config.lr * gt[i];
      }
      epoch_loss += loss_value;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    if (curve) curve->push_back({epoch, epoch_loss, -1.0});
  }
  return params;
}

namespace {

// Shared loop for plain and adversarial classifier training; with no pgd
// config (or a zero budget) the perturbation is the identity.
ClassifierParams train_classifier_impl(const TrainConfig& config,
                                       const std::optional<PgdConfig>& pgd,
                                       const Dataset& data,
                                       std::vector<TrainCurvePoint>* curve) {
  validate(config);
  if (pgd) validate(*pgd);
  if (data.samples.empty()) throw TrainingError("train: empty dataset");

  ClassifierArch arch;
  arch.data_dim = data.dim();
  arch.classes = data.classes();

  RngStream init_rng(config.seed, stream_ids::kModelInit);
  RngStream rng(config.seed, stream_ids::kTraining);
  RngStream pgd_rng(config.seed, stream_ids::kPgd);
  ClassifierParams params = make_classifier(arch, init_rng);

  const std::size_t n = data.samples.size();
  const std::size_t d = arch.data_dim;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t b = std::min(config.batch, n - start);
      Tensor x = Tensor::zeros({b, d});
      std::vector<std::size_t> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const LabeledSample& s = data.samples[order[start + i]];
        Tensor xi = s.x;
        if (pgd) xi = pgd_attack(params, xi, s.label, *pgd, pgd_rng);
        for (std::size_t j = 0; j < d; ++j) x.at(i, j) = xi[j];
        labels[i] = s.label;
      }

      Tape tape;
      const MlpVars mlp_vars = mlp_to_tape(tape, params.mlp);
      const Var x_var = tape.input(std::move(x));
      const Var logits = mlp_forward_tape(tape, mlp_vars, x_var);
      const Var logp = tape.log_softmax_rows(logits);
      const Var picked = tape.pick_per_row(logp, std::move(labels));
      const Var loss =
          tape.scale(tape.sum(picked), -1.0 / static_cast<double>(b));
      const double loss_value = tape.scalar(loss);
      check_loss_finite(loss_value, epoch);
      tape.backward(loss);
      mlp_apply_sgd(params.mlp, tape, mlp_vars, config.lr);
      epoch_loss += loss_value;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    if (curve) {
      curve->push_back(
          {epoch, epoch_loss, classifier_accuracy(params, data.samples)});
    }
  }
  return params;
}

}  // namespace

ClassifierParams train_classifier(const TrainConfig& config,
                                  const Dataset& data,
                                  std::vector<TrainCurvePoint>* curve) {
  return train_classifier_impl(config, std::nullopt, data, curve);
}

ClassifierParams adversarial_train(const TrainConfig& config,
                                   const PgdConfig& pgd, const Dataset& data,
                                   std::vector<TrainCurvePoint>* curve) {
  return train_classifier_impl(config, pgd, data, curve);
}

Tensor pgd_attack(const ClassifierParams& f, const Tensor& x, std::size_t y,
                  const PgdConfig& cfg, RngStream& rng) {
  if (cfg.epsilon == 0.0) return x;
  validate(cfg);
  Tensor cur = x;
  if (cfg.random_start) {
    for (std::size_t i = 0; i < cur.size(); ++i) {
      cur[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
    }
  }
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // ascend cross-entropy: step against the true-label log-prob gradient
    const Tensor g = classifier_input_grad(f, cur, y);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double sgn = g[i] > 0 ? -1.0 : (g[i] < 0 ? 1.0 : 0.0);
      cur[i] += cfg.step_size * sgn;
      cur[i] = std::clamp(cur[i], x[i] - cfg.epsilon, x[i] + cfg.epsilon);
    }
  }
  return cur;
}

double classifier_accuracy(const ClassifierParams& p,
                           std::span<const LabeledSample> samples) {
  if (samples.empty()) throw std::invalid_argument("accuracy: empty sample set");
  std::size_t hits = 0;
  for (const LabeledSample& s : samples) {
    if (classifier_predict(p, s.x) == s.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double pgd_misclassification_rate(const ClassifierParams& p,
                                  std::span<const LabeledSample> samples,
                                  const PgdConfig& cfg, RngStream& rng) {
  if (samples.empty()) {
    throw std::invalid_argument("pgd rate: empty sample set");
  }
  std::size_t fooled = 0;
  for (const LabeledSample& s : samples) {
    const Tensor adv = pgd_attack(p, s.x, s.label, cfg, rng);
    if (classifier_predict(p, adv) != s.label) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(samples.size());
}

void write_curve_csv(const std::string& path,
                     std::span<const TrainCurvePoint> curve) {
  std::ofstream os(path);
  if (!os) throw ConfigError("curve: cannot write " + path);
  os << "epoch,loss,accuracy\n";
  char buf[64];
  for (const TrainCurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.loss);
    os << p.epoch << "," << buf << ",";
    if (p.accuracy >= 0) {
      std::snprintf(buf, sizeof(buf), "%.17g", p.accuracy);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace advdiff
