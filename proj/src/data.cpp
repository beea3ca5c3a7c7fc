#include "advdiff/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "advdiff/errors.hpp"
#include "advdiff/nn.hpp"

namespace advdiff {

Dataset make_ring_mixture(std::size_t classes, std::size_t per_class,
                          double radius, double gamma, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("ring: need >= 2 classes");
  if (per_class < 1) throw std::invalid_argument("ring: need >= 1 per class");
  if (!(gamma > 0)) throw std::invalid_argument("ring: gamma must be > 0");

  Dataset ds;
  ds.gamma = gamma;
  ds.seed = seed;
  for (std::size_t k = 0; k < classes; ++k) {
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(k) /
        static_cast<double>(classes);
    ds.centers.push_back(
        Tensor::vec({radius * std::cos(angle), radius * std::sin(angle)}));
  }
  RngStream rng(seed, stream_ids::kDataset);
  ds.samples.reserve(classes * per_class);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Tensor x = ds.centers[k];
      for (std::size_t d = 0; d < x.size(); ++d) x[d] += gamma * rng.normal();
      ds.samples.push_back({std::move(x), k});
    }
  }
  return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("dataset: cannot write " + path);
  const std::size_t d = ds.dim();
  for (std::size_t i = 0; i < d; ++i) os << "x" << i << ",";
  os << "label\n";
  char buf[64];
  for (const LabeledSample& s : ds.samples) {
    for (std::size_t i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.x[i]);
      os << buf << ",";
    }
    os << s.label << "\n";
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("dataset: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("dataset: empty file");
  std::size_t dims = 0;
  {
    std::istringstream hs(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.empty() || cols.back() != "label") {
      throw ConfigError("dataset: header must end with 'label'");
    }
    dims = cols.size() - 1;
  }
  Dataset ds;
  std::size_t max_label = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    LabeledSample s;
    s.x = Tensor::zeros({dims});
    for (std::size_t i = 0; i < dims; ++i) {
      if (!std::getline(ls, cell, ',')) {
        throw ConfigError("dataset: short row in " + path);
      }
      s.x[i] = std::stod(cell);
    }
    if (!std::getline(ls, cell)) throw ConfigError("dataset: missing label");
    s.label = static_cast<std::size_t>(std::stoull(cell));
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ConfigError("dataset: no samples in " + path);
  // centers approximated by per-class means
  std::vector<std::size_t> counts(max_label + 1, 0);
  std::vector<Tensor> sums(max_label + 1, Tensor::zeros({dims}));
  for (const LabeledSample& s : ds.samples) {
    counts[s.label] += 1;
    for (std::size_t i = 0; i < dims; ++i) sums[s.label][i] += s.x[i];
  }
  for (std::size_t k = 0; k <= max_label; ++k) {
    if (counts[k] == 0) {
      throw ConfigError("dataset: class " + std::to_string(k) +
                        " has no samples");
    }
    ds.centers.push_back((1.0 / static_cast<double>(counts[k])) * sums[k]);
  }
  return ds;
}

std::size_t nearest_center(const std::vector<Tensor>& centers,
                           const Tensor& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = squared_norm(x - centers[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

AnalyticDenoiser::AnalyticDenoiser(std::vector<Tensor> centers, double gamma,
                                   NoiseSchedule sched)
    : centers_(std::move(centers)), gamma_(gamma), sched_(std::move(sched)) {
  if (centers_.empty()) {
    throw std::invalid_argument("analytic denoiser: no centers");
  }
  if (!(gamma_ > 0)) {
    throw std::invalid_argument("analytic denoiser: gamma must be > 0");
  }
}

Tensor AnalyticDenoiser::epsilon(const Tensor& x_t, std::size_t t,
                                 Label y) const {
  if (t < 1 || t > sched_.timesteps) {
    throw std::invalid_argument("analytic denoiser: timestep out of range");
  }
  const double ab = sched_.alpha_bar[t];
  const double sqrt_ab = std::sqrt(ab);
  const double var = ab * gamma_ * gamma_ + (1.0 - ab);  // marginal variance
  const double coef = std::sqrt(1.0 - ab) / var;

  if (y.has_value()) {
    if (*y >= centers_.size()) {
      throw std::invalid_argument("analytic denoiser: label out of range");
    }
    const Tensor& c = centers_[*y];
    Tensor out = x_t;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = coef * (x_t[i] - sqrt_ab * c[i]);
    }
    return out;
  }

  // unconditional: posterior-weighted mixture of the per-class predictions,
  // weights ~ N(x_t; sqrt(ab) c_k, var I) with equal priors
  const std::size_t K = centers_.size();
  Tensor logw = Tensor::zeros({K});
  for (std::size_t k = 0; k < K; ++k) {
    double d2 = 0;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      const double diff = x_t[i] - sqrt_ab * centers_[k][i];
      d2 += diff * diff;
    }
    logw[k] = -d2 / (2.0 * var);
  }
  const Tensor w = softmax_stable(logw);
  Tensor out = Tensor::zeros(x_t.shape());
  for (std::size_t k = 0; k < K; ++k) {
    const Tensor& c = centers_[k];
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += w[k] * coef * (x_t[i] - sqrt_ab * c[i]);
    }
  }
  return out;
}

Tensor analytic_epsilon(const AnalyticDenoiser& d, const Tensor& x_t,
                        std::size_t t, Label y) {
  return d.epsilon(x_t, t, y);
}

QuadraticClassifier::QuadraticClassifier(std::vector<Tensor> centers,
                                         double tau)
    : centers_(std::move(centers)), tau_(tau) {
  if (centers_.empty()) {
    throw std::invalid_argument("quadratic classifier: no centers");
  }
  if (!(tau_ > 0)) {
    throw std::invalid_argument("quadratic classifier: tau must be > 0");
  }
}

Tensor QuadraticClassifier::logits(const Tensor& x) const {
  Tensor out = Tensor::zeros({centers_.size()});
  for (std::size_t k = 0; k < centers_.size(); ++k) {
    out[k] = -squared_norm(x - centers_[k]) / (2.0 * tau_);
  }
  return out;
}

Tensor QuadraticClassifier::log_probs(const Tensor& x) const {
  return log_softmax_stable(logits(x));
}

Tensor QuadraticClassifier::log_prob_grad(const Tensor& x,
                                          std::size_t y) const {
  return quadratic_logprob_grad(*this, x, y);
}

Tensor quadratic_logprob_grad(const QuadraticClassifier& q, const Tensor& x,
                              std::size_t y) {
  if (y >= q.num_classes()) {
    throw std::invalid_argument("quadratic classifier: label out of range");
  }
  const Tensor p = softmax_stable(q.logits(x));
  Tensor g = Tensor::zeros(x.shape());
  const auto& centers = q.centers();
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = -(x[i] - centers[y][i]);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      acc += p[k] * (x[i] - centers[k][i]);
    }
    g[i] = acc / q.tau();
  }
  return g;
}

QuadraticClassifier nearest_center_oracle(std::vector<Tensor> centers) {
  return QuadraticClassifier(std::move(centers), 1.0);
}

}  // namespace advdiff
