#include "posergcn/tape.hpp"

#include <cmath>

namespace posergcn {

namespace debug {
namespace {
bool g_backward_fault = false;
}
void inject_backward_fault(bool on) { g_backward_fault = on; }
bool backward_fault_injected() { return g_backward_fault; }
}  // namespace debug

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::push(TapeNode n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Param& p) {
  TapeNode n;
  n.op = Op::leaf;
  n.param = &p;
  n.value = p.value;
  return push(std::move(n));
}

Var Tape::constant(Matrix m) {
  TapeNode n;
  n.op = Op::constant;
  n.value = std::move(m);
  return push(std::move(n));
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ArgumentError("operands live on different tapes");
  return *a.tape;
}

Var unary(Var a, Op op, Matrix value) {
  TapeNode n;
  n.op = op;
  n.a = a.id;
  n.value = std::move(value);
  return a.tape->push(std::move(n));
}

Var binary(Var a, Var b, Op op, Matrix value) {
  Tape& t = same_tape(a, b);
  TapeNode n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(value);
  return t.push(std::move(n));
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var add(Var a, Var b) { return binary(a, b, Op::add, add(a.value(), b.value())); }
Var sub(Var a, Var b) { return binary(a, b, Op::sub, sub(a.value(), b.value())); }

Var scale(Var a, double s) {
  Var out = unary(a, Op::scale, scale(a.value(), s));
  out.tape->node(out.id).factor = s;
  return out;
}

Var add_rowvec(Var x, Var row) {
  return binary(x, row, Op::add_rowvec, add_rowvec(x.value(), row.value()));
}

Var matmul(Var a, Var b) { return binary(a, b, Op::matmul, matmul(a.value(), b.value())); }
Var hadamard(Var a, Var b) { return binary(a, b, Op::hadamard, hadamard(a.value(), b.value())); }
Var transpose(Var a) { return unary(a, Op::transpose, transpose(a.value())); }

Var tanh(Var a) {
  return unary(a, Op::tanh_fn, apply(a.value(), [](double x) { return std::tanh(x); }));
}

Var sigmoid(Var a) { return unary(a, Op::sigmoid_fn, apply(a.value(), sigmoid_scalar)); }

Var relu(Var a) {
  return unary(a, Op::relu_fn, apply(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

Var sqrt(Var a) {
  return unary(a, Op::sqrt_fn, apply(a.value(), [](double x) { return std::sqrt(x); }));
}

Var rows_mean(Var a) { return unary(a, Op::rows_mean, rows_mean(a.value())); }

Var sum_all(Var a) { return unary(a, Op::sum_all, Matrix(1, 1, sum_all(a.value()))); }

Var softmax_col(Var a) {
  const Matrix& v = a.value();
  if (v.cols() != 1) throw DimensionError("softmax_col: expected column vector, got " + shape_str(v));
  Matrix out(v.rows(), 1);
  std::vector<double> s = softmax_vector(v.data());
  for (int i = 0; i < v.rows(); ++i) out(i, 0) = s[static_cast<size_t>(i)];
  return unary(a, Op::softmax_col, std::move(out));
}

Var row(Var a, int i) {
  const Matrix& v = a.value();
  if (i < 0 || i >= v.rows())
    throw ArgumentError("row: index " + std::to_string(i) + " out of " + shape_str(v));
  Matrix out(1, v.cols());
  for (int j = 0; j < v.cols(); ++j) out(0, j) = v(i, j);
  Var r = unary(a, Op::row_select, std::move(out));
  r.tape->node(r.id).aux = i;
  return r;
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ArgumentError("stack_rows: empty input");
  Tape* t = rows.front().tape;
  const int cols = rows.front().cols();
  Matrix out(static_cast<int>(rows.size()), cols);
  TapeNode n;
  n.op = Op::stack_rows;
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].tape != t) throw ArgumentError("stack_rows: operands live on different tapes");
    const Matrix& v = rows[k].value();
    if (v.rows() != 1 || v.cols() != cols)
      throw DimensionError("stack_rows: row " + std::to_string(k) + " is " + shape_str(v) +
                           ", expected 1x" + std::to_string(cols));
    for (int j = 0; j < cols; ++j) out(static_cast<int>(k), j) = v(0, j);
    n.ins.push_back(rows[k].id);
  }
  n.value = std::move(out);
  return t->push(std::move(n));
}

Var concat_cols(Var a, Var b) {
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  if (va.rows() != vb.rows())
    throw DimensionError("concat_cols: " + shape_str(va) + " vs " + shape_str(vb));
  Matrix out(va.rows(), va.cols() + vb.cols());
  for (int i = 0; i < va.rows(); ++i) {
    for (int j = 0; j < va.cols(); ++j) out(i, j) = va(i, j);
    for (int j = 0; j < vb.cols(); ++j) out(i, va.cols() + j) = vb(i, j);
  }
  return binary(a, b, Op::concat_cols, std::move(out));
}

Var cross_entropy(Var logits, int label) {
  const Matrix& z = logits.value();
  if (z.rows() != 1) throw DimensionError("cross_entropy: logits must be 1xC, got " + shape_str(z));
  if (label < 0 || label >= z.cols())
    throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range [0, " +
                        std::to_string(z.cols()) + ")");
  std::vector<double> p = softmax_vector(z.data());
  Var out = unary(logits, Op::cross_entropy, Matrix(1, 1, -std::log(p[static_cast<size_t>(label)])));
  out.tape->node(out.id).aux = label;
  return out;
}

Var euclidean(Var a, Var b) {
  Var d = sub(a, b);
  return sqrt(sum_all(hadamard(d, d)));
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ArgumentError("backward: root from another tape");
  const Matrix& rv = value(root.id);
  if (rv.rows() != 1 || rv.cols() != 1)
    throw ArgumentError("backward: root must be scalar, got " + shape_str(rv));

  for (int i = 0; i <= root.id; ++i) {
    TapeNode& n = nodes_[static_cast<size_t>(i)];
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  nodes_[static_cast<size_t>(root.id)].grad(0, 0) = 1.0;

  for (int i = root.id; i >= 0; --i) {
    TapeNode& n = nodes_[static_cast<size_t>(i)];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::leaf:
        n.param->grad = add(n.param->grad, g);
        break;
      case Op::constant:
        break;
      case Op::add: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gb = nodes_[static_cast<size_t>(n.b)].grad;
        ga = add(ga, g);
        gb = add(gb, g);
        break;
      }
      case Op::sub: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gb = nodes_[static_cast<size_t>(n.b)].grad;
        ga = add(ga, g);
        gb = sub(gb, g);
        break;
      }
      case Op::scale: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        ga = add(ga, scale(g, n.factor));
        break;
      }
      case Op::add_rowvec: {
        auto& gx = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gr = nodes_[static_cast<size_t>(n.b)].grad;
        gx = add(gx, g);
        gr = add(gr, colsum(g));
        break;
      }
      case Op::matmul: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].value;
        const Matrix& bv = nodes_[static_cast<size_t>(n.b)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gb = nodes_[static_cast<size_t>(n.b)].grad;
        ga = add(ga, matmul(g, transpose(bv)));
        gb = add(gb, matmul(transpose(av), g));
        break;
      }
      case Op::hadamard: {
        const Matrix& av = nodes_[static_cast<size_t>(n.a)].value;
        const Matrix& bv = nodes_[static_cast<size_t>(n.b)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gb = nodes_[static_cast<size_t>(n.b)].grad;
        ga = add(ga, hadamard(g, bv));
        gb = add(gb, hadamard(g, av));
        break;
      }
      case Op::transpose: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        ga = add(ga, transpose(g));
        break;
      }
      case Op::tanh_fn: {
        const double fault = debug::backward_fault_injected() ? 1.05 : 1.0;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        Matrix d(n.value.rows(), n.value.cols());
        for (int k = 0; k < d.size(); ++k) d[k] = fault * g[k] * (1.0 - n.value[k] * n.value[k]);
        ga = add(ga, d);
        break;
      }
      case Op::sigmoid_fn: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        Matrix d(n.value.rows(), n.value.cols());
        for (int k = 0; k < d.size(); ++k) d[k] = g[k] * n.value[k] * (1.0 - n.value[k]);
        ga = add(ga, d);
        break;
      }
      case Op::relu_fn: {
        const Matrix& x = nodes_[static_cast<size_t>(n.a)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        Matrix d(x.rows(), x.cols());
        for (int k = 0; k < d.size(); ++k) d[k] = x[k] > 0.0 ? g[k] : 0.0;
        ga = add(ga, d);
        break;
      }
      case Op::sqrt_fn: {
        // Subgradient 0 at the origin; the hinge boundary case never needs
        // a gradient there.
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        Matrix d(n.value.rows(), n.value.cols());
        for (int k = 0; k < d.size(); ++k) d[k] = n.value[k] > 0.0 ? g[k] / (2.0 * n.value[k]) : 0.0;
        ga = add(ga, d);
        break;
      }
      case Op::rows_mean: {
        const Matrix& x = nodes_[static_cast<size_t>(n.a)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        const double inv = 1.0 / x.rows();
        Matrix d(x.rows(), x.cols());
        for (int r = 0; r < x.rows(); ++r)
          for (int c = 0; c < x.cols(); ++c) d(r, c) = g(0, c) * inv;
        ga = add(ga, d);
        break;
      }
      case Op::sum_all: {
        const Matrix& x = nodes_[static_cast<size_t>(n.a)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        ga = add(ga, Matrix(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::softmax_col: {
        // dx = y .* (g - <g, y>)
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        double dot = 0.0;
        for (int k = 0; k < n.value.rows(); ++k) dot += g(k, 0) * n.value(k, 0);
        Matrix d(n.value.rows(), 1);
        for (int k = 0; k < n.value.rows(); ++k) d(k, 0) = n.value(k, 0) * (g(k, 0) - dot);
        ga = add(ga, d);
        break;
      }
      case Op::row_select: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        for (int j = 0; j < n.value.cols(); ++j) ga(n.aux, j) += g(0, j);
        break;
      }
      case Op::stack_rows: {
        for (size_t k = 0; k < n.ins.size(); ++k) {
          auto& gk = nodes_[static_cast<size_t>(n.ins[k])].grad;
          for (int j = 0; j < n.value.cols(); ++j) gk(0, j) += g(static_cast<int>(k), j);
        }
        break;
      }
      case Op::concat_cols: {
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        auto& gb = nodes_[static_cast<size_t>(n.b)].grad;
        const int ca = ga.cols();
        for (int r = 0; r < g.rows(); ++r) {
          for (int j = 0; j < ca; ++j) ga(r, j) += g(r, j);
          for (int j = 0; j < gb.cols(); ++j) gb(r, j) += g(r, ca + j);
        }
        break;
      }
      case Op::cross_entropy: {
        const Matrix& z = nodes_[static_cast<size_t>(n.a)].value;
        auto& ga = nodes_[static_cast<size_t>(n.a)].grad;
        std::vector<double> p = softmax_vector(z.data());
        const double gs = g(0, 0);
        for (int j = 0; j < z.cols(); ++j) {
          const double onehot = j == n.aux ? 1.0 : 0.0;
          ga(0, j) += gs * (p[static_cast<size_t>(j)] - onehot);
        }
        break;
      }
    }
  }
}

}  // namespace posergcn
