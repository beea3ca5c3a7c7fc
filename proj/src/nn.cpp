#include "advdiff/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace advdiff {

namespace {

std::vector<std::size_t> layer_widths(const MlpArch& arch) {
  std::vector<std::size_t> w;
  w.push_back(arch.in);
  for (std::size_t h : arch.hidden) w.push_back(h);
  w.push_back(arch.out);
  return w;
}

// y = x W + b for rank-1 x
void affine(const Tensor& x, const Tensor& W, const Tensor& b, Tensor& y) {
  const std::size_t in = W.rows(), out = W.cols();
  y = Tensor::zeros({out});
  for (std::size_t i = 0; i < in; ++i) {
    const double xv = x[i];
    const double* wrow = W.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xv * wrow[j];
  }
  for (std::size_t j = 0; j < out; ++j) y[j] += b[j];
}

}  // namespace

MlpParams make_mlp(const MlpArch& arch, RngStream& rng) {
  if (arch.in == 0 || arch.out == 0) {
    throw std::invalid_argument("mlp: zero-width layer");
  }
  MlpParams p;
  p.arch = arch;
  const auto widths = layer_widths(arch);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    Tensor W = Tensor::zeros({widths[l], widths[l + 1]});
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = sd * rng.normal();
    p.weights.push_back(std::move(W));
    p.biases.push_back(Tensor::zeros({widths[l + 1]}));
  }
  return p;
}

MlpParams make_zero_mlp(const MlpArch& arch) {
  MlpParams p;
  p.arch = arch;
  const auto widths = layer_widths(arch);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.weights.push_back(Tensor::zeros({widths[l], widths[l + 1]}));
    p.biases.push_back(Tensor::zeros({widths[l + 1]}));
  }
  return p;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  if (x.rank() == 2) {
    // batch path, row per sample
    const std::size_t m = x.rows();
    Tensor out = Tensor::zeros({m, p.arch.out});
    for (std::size_t i = 0; i < m; ++i) {
      const Tensor yi = mlp_forward(p, x.row(i));
      for (std::size_t j = 0; j < p.arch.out; ++j) out.at(i, j) = yi[j];
    }
    return out;
  }
  if (x.size() != p.arch.in) {
    throw std::invalid_argument("mlp_forward: input width mismatch");
  }
  Tensor h = x;
  Tensor next;
  const std::size_t layers = p.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    affine(h, p.weights[l], p.biases[l], next);
    if (l + 1 < layers) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = std::tanh(next[i]);
      }
    }
    h = next;
  }
  return h;
}

Tensor mlp_forward_trace(const MlpParams& p, const Tensor& x,
                         MlpTrace& trace) {
  if (x.size() != p.arch.in) {
    throw std::invalid_argument("mlp_forward_trace: input width mismatch");
  }
  trace.activations.clear();
  Tensor h = x;
  Tensor next;
  const std::size_t layers = p.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    affine(h, p.weights[l], p.biases[l], next);
    if (l + 1 < layers) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = std::tanh(next[i]);
      }
      trace.activations.push_back(next);
    }
    h = next;
  }
  return h;
}

Tensor mlp_input_grad_from_trace(const MlpParams& p, const MlpTrace& trace,
                                 const Tensor& x, const Tensor& dlogits) {
  const std::size_t layers = p.weights.size();
  Tensor g = dlogits;  // gradient flowing backwards, pre-activation space
  for (std::size_t l = layers; l-- > 0;) {
    const Tensor& W = p.weights[l];
    const std::size_t in = W.rows(), out = W.cols();
    Tensor gin = Tensor::zeros({in});
    for (std::size_t i = 0; i < in; ++i) {
      const double* wrow = W.data() + i * out;
      double acc = 0;
      for (std::size_t j = 0; j < out; ++j) acc += wrow[j] * g[j];
      gin[i] = acc;
    }
    if (l > 0) {
      const Tensor& a = trace.activations[l - 1];
      for (std::size_t i = 0; i < in; ++i) gin[i] *= (1.0 - a[i] * a[i]);
    }
    g = std::move(gin);
  }
  (void)x;
  return g;
}

MlpVars mlp_to_tape(Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    v.weights.push_back(tape.input(p.weights[l]));
    v.biases.push_back(tape.input(p.biases[l]));
  }
  return v;
}

Var mlp_forward_tape(Tape& tape, const MlpVars& vars, Var x) {
  Var h = x;
  const std::size_t layers = vars.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.add_row_bias(tape.matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < layers) h = tape.tanh(h);
  }
  return h;
}

void mlp_apply_sgd(MlpParams& p, const Tape& tape, const MlpVars& vars,
                   double lr) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Tensor& gw = tape.adjoint(vars.weights[l]);
    const Tensor& gb = tape.adjoint(vars.biases[l]);
    for (std::size_t i = 0; i < p.weights[l].size(); ++i) {
      p.weights[l][i] -= lr * gw[i];
    }
    for (std::size_t i = 0; i < p.biases[l].size(); ++i) {
      p.biases[l][i] -= lr * gb[i];
    }
  }
}

Tensor log_softmax_stable(const Tensor& logits) {
  Tensor out = logits;
  double mx = out[0];
  for (std::size_t i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
  double lse = 0;
  for (std::size_t i = 0; i < out.size(); ++i) lse += std::exp(out[i] - mx);
  lse = mx + std::log(lse);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lse;
  return out;
}

Tensor softmax_stable(const Tensor& logits) {
  Tensor out = log_softmax_stable(logits);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return out;
}

std::size_t argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace advdiff
