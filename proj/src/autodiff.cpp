#include "advdiff/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kMatmul: return "matmul";
    case Op::kAddRowBias: return "add_row_bias";
    case Op::kTanh: return "tanh";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kPick: return "pick_per_row";
    case Op::kEmbed: return "embed_rows";
    case Op::kConcat: return "concat_cols";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
  }
  return "?";
}

Var Tape::push(Node node, const char* name) {
  if (!node.value.all_finite()) {
    throw NumericsError(std::string("tape: operation '") + name +
                        "' produced a non-finite value");
  }
  nodes_.push_back(std::move(node));
  return Var(nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  Node n{Op::kInput, std::move(value)};
  return push(std::move(n), "input");
}

Var Tape::add(Var a, Var b) {
  Node n{Op::kAdd, value(a) + value(b), a.id(), b.id()};
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  Node n{Op::kSub, value(a) - value(b), a.id(), b.id()};
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  Node n{Op::kMul, hadamard(value(a), value(b)), a.id(), b.id()};
  return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double k) {
  Node n{Op::kScale, k * value(a), a.id()};
  n.k = k;
  return push(std::move(n), "scale");
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rank() == 2 && B.rank() == 2, "matmul: rank-2 operands required");
  require(A.cols() == B.rows(), "matmul: inner dimensions differ");
  const std::size_t m = A.rows(), k = A.cols(), ncols = B.cols();
  Tensor out = Tensor::zeros({m, ncols});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = A.data() + i * k;
    double* orow = out.data() + i * ncols;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = B.data() + p * ncols;
      for (std::size_t j = 0; j < ncols; ++j) orow[j] += av * brow[j];
    }
  }
  Node n{Op::kMatmul, std::move(out), a.id(), b.id()};
  return push(std::move(n), "matmul");
}

Var Tape::add_row_bias(Var a, Var bias) {
  const Tensor& A = value(a);
  const Tensor& b = value(bias);
  require(A.rank() == 2, "add_row_bias: rank-2 input required");
  require(b.size() == A.cols(), "add_row_bias: bias width mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double* orow = out.data() + i * A.cols();
    for (std::size_t j = 0; j < A.cols(); ++j) orow[j] += b[j];
  }
  Node n{Op::kAddRowBias, std::move(out), a.id(), bias.id()};
  return push(std::move(n), "add_row_bias");
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  Node n{Op::kTanh, std::move(out), a.id()};
  return push(std::move(n), "tanh");
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& A = value(a);
  require(A.rank() == 2, "log_softmax: rank-2 input required");
  Tensor out = A;
  const std::size_t m = A.rows(), c = A.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0;
    for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    for (std::size_t j = 0; j < c; ++j) row[j] -= lse;
  }
  Node n{Op::kLogSoftmax, std::move(out), a.id()};
  return push(std::move(n), "log_softmax");
}

Var Tape::pick_per_row(Var a, std::vector<std::size_t> cols) {
  const Tensor& A = value(a);
  require(A.rank() == 2, "pick_per_row: rank-2 input required");
  require(cols.size() == A.rows(), "pick_per_row: one index per row required");
  Tensor out = Tensor::zeros({A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i) {
    require(cols[i] < A.cols(), "pick_per_row: column index out of range");
    out[i] = A.at(i, cols[i]);
  }
  Node n{Op::kPick, std::move(out), a.id()};
  n.indices = std::move(cols);
  return push(std::move(n), "pick_per_row");
}

Var Tape::embed_rows(Var table, std::vector<std::size_t> rows) {
  const Tensor& T = value(table);
  require(T.rank() == 2, "embed_rows: rank-2 table required");
  const std::size_t e = T.cols();
  Tensor out = Tensor::zeros({rows.size(), e});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < T.rows(), "embed_rows: row index out of range");
    for (std::size_t j = 0; j < e; ++j) out.at(i, j) = T.at(rows[i], j);
  }
  Node n{Op::kEmbed, std::move(out), table.id()};
  n.indices = std::move(rows);
  return push(std::move(n), "embed_rows");
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require(A.rank() == 2 && B.rank() == 2, "concat_cols: rank-2 inputs required");
  require(A.rows() == B.rows(), "concat_cols: row count mismatch");
  const std::size_t m = A.rows(), p = A.cols(), q = B.cols();
  Tensor out = Tensor::zeros({m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) out.at(i, j) = A.at(i, j);
    for (std::size_t j = 0; j < q; ++j) out.at(i, p + j) = B.at(i, j);
  }
  Node n{Op::kConcat, std::move(out), a.id(), b.id()};
  return push(std::move(n), "concat_cols");
}

Var Tape::sum(Var a) {
  const Tensor& A = value(a);
  double s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
  Node n{Op::kSum, Tensor::vec({s}), a.id()};
  return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
  const Tensor& A = value(a);
  require(A.size() > 0, "mean: empty input");
  double s = 0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
  Node n{Op::kMean, Tensor::vec({s / static_cast<double>(A.size())}), a.id()};
  return push(std::move(n), "mean");
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  require(t.size() == 1, "scalar: node is not scalar-shaped");
  return t[0];
}

const Tensor& Tape::adjoint(Var v) const {
  require(swept_, "adjoint: backward() has not run");
  return adjoints_[v.id()];
}

void Tape::backward(Var output) {
  require(value(output).size() == 1, "backward: output must be scalar");
  adjoints_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    adjoints_[i] = Tensor::zeros(nodes_[i].value.shape());
  }
  adjoints_[output.id()][0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& n = nodes_[idx];
    const Tensor& g = adjoints_[idx];
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kAdd: {
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& av = nodes_[n.a].value;
        const Tensor& bv = nodes_[n.b].value;
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * bv[i];
          gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kScale: {
        Tensor& ga = adjoints_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.k * g[i];
        break;
      }
      case Op::kMatmul: {
        const Tensor& A = nodes_[n.a].value;
        const Tensor& B = nodes_[n.b].value;
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        const std::size_t m = A.rows(), k = A.cols(), c = B.cols();
        // dA = g B^T
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * c;
          double* garow = ga.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = B.data() + p * c;
            double acc = 0;
            for (std::size_t j = 0; j < c; ++j) acc += grow[j] * brow[j];
            garow[p] += acc;
          }
        }
        // dB = A^T g
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = A.data() + i * k;
          const double* grow = g.data() + i * c;
          for (std::size_t p = 0; p < k; ++p) {
            double* gbrow = gb.data() + p * c;
            const double av = arow[p];
            for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * grow[j];
          }
        }
        break;
      }
      case Op::kAddRowBias: {
        const std::size_t m = g.rows(), c = g.cols();
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) gb[j] += grow[j];
        }
        break;
      }
      case Op::kTanh: {
        const Tensor& y = n.value;
        Tensor& ga = adjoints_[n.a];
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }
      case Op::kLogSoftmax: {
        // dx = g - softmax(x) * rowsum(g), softmax recovered as exp(y)
        const Tensor& y = n.value;
        Tensor& ga = adjoints_[n.a];
        const std::size_t m = y.rows(), c = y.cols();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * c;
          const double* yrow = y.data() + i * c;
          double* garow = ga.data() + i * c;
          double gsum = 0;
          for (std::size_t j = 0; j < c; ++j) gsum += grow[j];
          for (std::size_t j = 0; j < c; ++j) {
            garow[j] += grow[j] - std::exp(yrow[j]) * gsum;
          }
        }
        break;
      }
      case Op::kPick: {
        Tensor& ga = adjoints_[n.a];
        const std::size_t c = nodes_[n.a].value.cols();
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          ga[i * c + n.indices[i]] += g[i];
        }
        break;
      }
      case Op::kEmbed: {
        Tensor& ga = adjoints_[n.a];
        const std::size_t e = nodes_[n.a].value.cols();
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          const double* grow = g.data() + i * e;
          double* garow = ga.data() + n.indices[i] * e;
          for (std::size_t j = 0; j < e; ++j) garow[j] += grow[j];
        }
        break;
      }
      case Op::kConcat: {
        Tensor& ga = adjoints_[n.a];
        Tensor& gb = adjoints_[n.b];
        const std::size_t m = g.rows();
        const std::size_t p = nodes_[n.a].value.cols();
        const std::size_t q = nodes_[n.b].value.cols();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * (p + q);
          for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += grow[j];
          for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += grow[p + j];
        }
        break;
      }
      case Op::kSum: {
        Tensor& ga = adjoints_[n.a];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::kMean: {
        Tensor& ga = adjoints_[n.a];
        const double k = g[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += k;
        break;
      }
    }
    if (n.a != kNoParent && !adjoints_[n.a].all_finite()) {
      throw NumericsError(std::string("tape: backward through '") +
                          op_name(n.op) + "' produced a non-finite adjoint");
    }
    if (n.b != kNoParent && !adjoints_[n.b].all_finite()) {
      throw NumericsError(std::string("tape: backward through '") +
                          op_name(n.op) + "' produced a non-finite adjoint");
    }
  }
  swept_ = true;
}

Tensor grad(const std::function<Var(Tape&, Var)>& f, const Tensor& x) {
  Tape tape;
  Var xv = tape.input(x);
  Var out = f(tape, xv);
  if (tape.value(out).size() != 1) {
    throw std::invalid_argument("grad: f must evaluate to a scalar");
  }
  tape.backward(out);
  return tape.adjoint(xv);
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double h) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Tensor g = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace advdiff
