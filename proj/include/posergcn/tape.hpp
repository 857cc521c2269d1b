#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "posergcn/matrix.hpp"

namespace posergcn {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
};

/// A learnable parameter: a value matrix plus a gradient accumulator of the
/// same shape. Gradients accumulate across backward passes until reset.
struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  explicit Param(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { std::fill(grad.data().begin(), grad.data().end(), 0.0); }
};

enum class Op : uint8_t {
  leaf,
  constant,
  add,
  sub,
  scale,
  add_rowvec,
  matmul,
  hadamard,
  transpose,
  tanh_fn,
  sigmoid_fn,
  relu_fn,
  sqrt_fn,
  rows_mean,
  sum_all,
  softmax_col,
  row_select,
  stack_rows,
  concat_cols,
  cross_entropy,
};

struct TapeNode {
  Op op;
  int a = -1;
  int b = -1;
  std::vector<int> ins;  // stack_rows only
  Param* param = nullptr;
  int aux = 0;          // row index or class label
  double factor = 0.0;  // scale only
  Matrix value;
  Matrix grad;
};

/// Records a forward computation as an append-only list of nodes; node
/// inputs always precede the node, so reverse creation order is a reverse
/// topological order. A tape and the Params it touches belong to one thread.
class Tape {
 public:
  Var leaf(Param& p);
  Var constant(Matrix m);

  /// Seeds d(root)/d(root) = 1 and accumulates d(root)/d(param) into every
  /// reachable Param's grad. Root must be 1x1. Node-level gradients are
  /// reset on every call, so calling twice doubles the Param accumulators.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var push(TapeNode n);
  TapeNode& node(int id) { return nodes_[static_cast<size_t>(id)]; }

 private:
  std::vector<TapeNode> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var add_rowvec(Var x, Var row);
Var matmul(Var a, Var b);
Var hadamard(Var a, Var b);
Var transpose(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var sqrt(Var a);
Var rows_mean(Var a);
Var sum_all(Var a);

/// Softmax over an m x 1 column of scores.
Var softmax_col(Var a);

/// Extracts row i as a 1xC vector.
Var row(Var a, int i);

/// Stacks k row vectors (all 1xC) into a kxC matrix.
Var stack_rows(std::span<const Var> rows);

/// Horizontal concatenation of two matrices with equal row counts.
Var concat_cols(Var a, Var b);

/// -log softmax(logits)[label] for a 1xC logits row. Stable (max-subtracted).
Var cross_entropy(Var logits, int label);

/// Euclidean distance between two equal-shape matrices, as a 1x1 scalar.
Var euclidean(Var a, Var b);

namespace debug {
/// Test hook: multiplicatively corrupts the tanh backward rule so gradient
/// verification harnesses can prove they catch a broken rule.
void inject_backward_fault(bool on);
bool backward_fault_injected();
}  // namespace debug

}  // namespace posergcn
