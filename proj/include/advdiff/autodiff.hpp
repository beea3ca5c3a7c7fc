#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "advdiff/tensor.hpp"

namespace advdiff {

class Tape;

// Handle to a node on a Tape; only valid for the tape that created it.
class Var {
 public:
  Var() = default;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  explicit Var(std::size_t id) : id_(id) {}
  std::size_t id_ = std::numeric_limits<std::size_t>::max();
};

// Reverse-mode tape. Nodes are appended in evaluation order, so every
// node's parents precede it; backward() replays the record in reverse,
// accumulating exact chain-rule adjoints. A tape belongs to a single
// evaluation and is never shared.
//
// Every primitive checks its output for non-finite values and throws
// NumericsError naming the operation.
class Tape {
 public:
  Var input(Tensor value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double k);
  Var matmul(Var a, Var b);           // (m,k) x (k,n) -> (m,n)
  Var add_row_bias(Var a, Var bias);  // (m,n) + (n), broadcast over rows
  Var tanh(Var a);
  Var log_softmax_rows(Var a);  // stabilized via row-max subtraction
  // (m,n) -> (m): element cols[r] of each row
  Var pick_per_row(Var a, std::vector<std::size_t> cols);
  // (k,e) table -> (m,e): row rows[i] of the table per output row
  Var embed_rows(Var table, std::vector<std::size_t> rows);
  Var concat_cols(Var a, Var b);  // (m,p) ++ (m,q) -> (m,p+q)
  Var sum(Var a);                 // -> scalar (shape {1})
  Var mean(Var a);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  double scalar(Var v) const;

  // Seeds the output adjoint with 1 and sweeps the tape in reverse.
  void backward(Var scalar_output);
  const Tensor& adjoint(Var v) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kInput,
    kAdd,
    kSub,
    kMul,
    kScale,
    kMatmul,
    kAddRowBias,
    kTanh,
    kLogSoftmax,
    kPick,
    kEmbed,
    kConcat,
    kSum,
    kMean,
  };

  struct Node {
    Op op;
    Tensor value;
    std::size_t a = kNoParent;
    std::size_t b = kNoParent;
    double k = 0.0;                    // kScale
    std::vector<std::size_t> indices;  // kPick / kEmbed
  };

  static constexpr std::size_t kNoParent =
      std::numeric_limits<std::size_t>::max();

  Var push(Node node, const char* op_name);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
  bool swept_ = false;
};

// Gradient of a scalar-valued tape program with respect to x, by exact
// reverse-mode accumulation.
Tensor grad(const std::function<Var(Tape&, Var)>& f, const Tensor& x);

// Central-difference estimate (f(x+h e_i) - f(x-h e_i)) / 2h per
// coordinate; the standard independent cross-check for grad.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h);

}  // namespace advdiff
