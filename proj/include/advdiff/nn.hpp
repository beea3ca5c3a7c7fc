#pragma once

#include <vector>

#include "advdiff/autodiff.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/tensor.hpp"

namespace advdiff {

// Fully connected net with tanh hidden layers and a linear head.
// Weights are stored (fan_in, fan_out) so a forward pass is x W + b.
struct MlpArch {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::size_t> hidden;

  std::size_t layer_count() const { return hidden.size() + 1; }
  bool operator==(const MlpArch&) const = default;
};

struct MlpParams {
  MlpArch arch;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

// N(0, 1/fan_in) weights, zero biases.
MlpParams make_mlp(const MlpArch& arch, RngStream& rng);
MlpParams make_zero_mlp(const MlpArch& arch);

// Pure forward pass; accepts a single input (rank 1) or a batch (rank 2)
// and returns the same rank.
Tensor mlp_forward(const MlpParams& p, const Tensor& x);

// Forward pass keeping post-activation values per hidden layer, for the
// hand-rolled input-gradient path below.
struct MlpTrace {
  std::vector<Tensor> activations;  // hidden-layer outputs, single input
};
Tensor mlp_forward_trace(const MlpParams& p, const Tensor& x, MlpTrace& trace);

// Backpropagates d(out)·dlogits through the trace down to the input.
Tensor mlp_input_grad_from_trace(const MlpParams& p, const MlpTrace& trace,
                                 const Tensor& x, const Tensor& dlogits);

// Tape mirror of the same network, for parameter gradients in training.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};
MlpVars mlp_to_tape(Tape& tape, const MlpParams& p);
Var mlp_forward_tape(Tape& tape, const MlpVars& vars, Var x);

// p -= lr * adjoint, reading adjoints of vars from the swept tape.
void mlp_apply_sgd(MlpParams& p, const Tape& tape, const MlpVars& vars,
                   double lr);

// Stabilized softmax helpers over a rank-1 logits vector.
Tensor log_softmax_stable(const Tensor& logits);
Tensor softmax_stable(const Tensor& logits);
std::size_t argmax(const Tensor& v);

}  // namespace advdiff
