#include "posergcn/cells.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace posergcn {

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::rgcn: return "rgcn";
    case CellKind::lgcn: return "lgcn";
    case CellKind::gcn_rnn: return "gcn_rnn";
    case CellKind::gcn_lstm: return "gcn_lstm";
  }
  return "?";
}

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "rgcn") return CellKind::rgcn;
  if (s == "lgcn") return CellKind::lgcn;
  if (s == "gcn_rnn") return CellKind::gcn_rnn;
  if (s == "gcn_lstm") return CellKind::gcn_lstm;
  throw ArgumentError("unknown cell kind: " + s);
}

Matrix init_uniform(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

RgcnParams RgcnParams::init(int n, int layers, std::mt19937_64& rng) {
  if (n < 1) throw ArgumentError("rgcn: hidden size must be >= 1");
  if (layers < 1) throw ArgumentError("rgcn: layer count must be >= 1");
  RgcnParams p;
  p.n = n;
  p.w_h = Param(init_uniform(n, n, n, rng));
  p.w_x.emplace_back(init_uniform(2, n, 2, rng));
  for (int l = 1; l < layers; ++l) p.w_x.emplace_back(init_uniform(n, n, n, rng));
  p.b = Param(init_uniform(1, n, n, rng));
  return p;
}

int RgcnParams::param_count() const {
  int count = w_h.value.size() + b.value.size();
  for (const auto& w : w_x) count += w.value.size();
  return count;
}

LgcnParams LgcnParams::init(int n, std::mt19937_64& rng) {
  if (n < 1) throw ArgumentError("lgcn: hidden size must be >= 1");
  LgcnParams p;
  p.n = n;
  for (int k = 0; k < 4; ++k) {
    p.w[static_cast<size_t>(k)] = Param(init_uniform(2, n, 2, rng));
    p.u[static_cast<size_t>(k)] = Param(init_uniform(n, n, n, rng));
    p.b[static_cast<size_t>(k)] = Param(init_uniform(1, n, n, rng));
  }
  return p;
}

int LgcnParams::param_count() const {
  int count = 0;
  for (int k = 0; k < 4; ++k)
    count += w[static_cast<size_t>(k)].value.size() + u[static_cast<size_t>(k)].value.size() +
             b[static_cast<size_t>(k)].value.size();
  return count;
}

GcnRnnParams GcnRnnParams::init(int n, std::mt19937_64& rng) {
  if (n < 1) throw ArgumentError("gcn_rnn: hidden size must be >= 1");
  GcnRnnParams p;
  p.n = n;
  p.w_g = Param(init_uniform(2, n, 2, rng));
  p.w_h = Param(init_uniform(n, n, n, rng));
  p.w_x = Param(init_uniform(n, n, n, rng));
  p.b = Param(init_uniform(1, n, n, rng));
  return p;
}

int GcnRnnParams::param_count() const {
  return w_g.value.size() + w_h.value.size() + w_x.value.size() + b.value.size();
}

GcnLstmParams GcnLstmParams::init(int n, std::mt19937_64& rng) {
  if (n < 1) throw ArgumentError("gcn_lstm: hidden size must be >= 1");
  GcnLstmParams p;
  p.n = n;
  p.w_g = Param(init_uniform(2, n, 2, rng));
  for (int k = 0; k < 4; ++k) {
    p.w[static_cast<size_t>(k)] = Param(init_uniform(n, n, n, rng));
    p.u[static_cast<size_t>(k)] = Param(init_uniform(n, n, n, rng));
    p.b[static_cast<size_t>(k)] = Param(init_uniform(1, n, n, rng));
  }
  return p;
}

int GcnLstmParams::param_count() const {
  int count = w_g.value.size();
  for (int k = 0; k < 4; ++k)
    count += w[static_cast<size_t>(k)].value.size() + u[static_cast<size_t>(k)].value.size() +
             b[static_cast<size_t>(k)].value.size();
  return count;
}

CellParams make_cell(CellKind kind, int n, int layers, std::mt19937_64& rng) {
  if (kind == CellKind::rgcn) return RgcnParams::init(n, layers, rng);
  if (layers != 1)
    throw ArgumentError("multiple graph-convolution layers are only supported for rgcn");
  switch (kind) {
    case CellKind::lgcn: return LgcnParams::init(n, rng);
    case CellKind::gcn_rnn: return GcnRnnParams::init(n, rng);
    case CellKind::gcn_lstm: return GcnLstmParams::init(n, rng);
    default: throw ArgumentError("unknown cell kind");
  }
}

CellKind cell_kind(const CellParams& cell) {
  return std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RgcnParams>) return CellKind::rgcn;
        else if constexpr (std::is_same_v<T, LgcnParams>) return CellKind::lgcn;
        else if constexpr (std::is_same_v<T, GcnRnnParams>) return CellKind::gcn_rnn;
        else return CellKind::gcn_lstm;
      },
      cell);
}

int param_count(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.param_count(); }, cell);
}

int hidden_size(const CellParams& cell) {
  return std::visit([](const auto& p) { return p.n; }, cell);
}

namespace {

// relu(a_hat^L . x0 . w_1 ... w_L) with a single relu around the product.
Var graph_term(Var x0, Var a_hat, std::vector<Param>& layers, Tape& tape) {
  Var g = x0;
  for (size_t l = 0; l < layers.size(); ++l) g = matmul(a_hat, g);
  for (auto& w : layers) g = matmul(g, tape.leaf(w));
  return relu(g);
}

Var gate_pre(Var x0, Var a_hat, Var h_prev, Param& w, Param& u, Param& b, Tape& tape) {
  Var conv = relu(matmul(matmul(a_hat, x0), tape.leaf(w)));
  return add_rowvec(add(conv, matmul(h_prev, tape.leaf(u))), tape.leaf(b));
}

}  // namespace

GraphState rgcn_step(const GraphState& state, Var x0, Var a_hat, RgcnParams& p) {
  Tape& tape = *x0.tape;
  Var recurrent = matmul(state.h, tape.leaf(p.w_h));
  Var graph = graph_term(x0, a_hat, p.w_x, tape);
  Var h = tanh(add_rowvec(add(recurrent, graph), tape.leaf(p.b)));
  return GraphState{h, std::nullopt};
}

GraphState lgcn_step(const GraphState& state, Var x0, Var a_hat, LgcnParams& p) {
  if (!state.c) throw ArgumentError("lgcn_step: state carries no cell memory");
  Tape& tape = *x0.tape;
  Var f = sigmoid(gate_pre(x0, a_hat, state.h, p.w[0], p.u[0], p.b[0], tape));
  Var i = sigmoid(gate_pre(x0, a_hat, state.h, p.w[1], p.u[1], p.b[1], tape));
  Var o = sigmoid(gate_pre(x0, a_hat, state.h, p.w[2], p.u[2], p.b[2], tape));
  Var g = tanh(gate_pre(x0, a_hat, state.h, p.w[3], p.u[3], p.b[3], tape));
  Var c = add(hadamard(f, *state.c), hadamard(i, g));
  Var h = hadamard(o, tanh(c));
  return GraphState{h, c};
}

GraphState gcn_rnn_step(const GraphState& state, Var x0, Var a_hat, GcnRnnParams& p) {
  Tape& tape = *x0.tape;
  Var frame = relu(matmul(matmul(a_hat, x0), tape.leaf(p.w_g)));
  Var w_h = tape.leaf(p.w_h);
  Var w_x = tape.leaf(p.w_x);
  Var b = tape.leaf(p.b);
  // The nodes enter the recurrent cell one at a time.
  std::vector<Var> next;
  next.reserve(kKeypoints);
  for (int i = 0; i < kKeypoints; ++i) {
    Var h_i = row(state.h, i);
    Var x_i = row(frame, i);
    next.push_back(tanh(add(add(matmul(h_i, w_h), matmul(x_i, w_x)), b)));
  }
  return GraphState{stack_rows(next), std::nullopt};
}

GraphState gcn_lstm_step(const GraphState& state, Var x0, Var a_hat, GcnLstmParams& p) {
  if (!state.c) throw ArgumentError("gcn_lstm_step: state carries no cell memory");
  Tape& tape = *x0.tape;
  Var frame = relu(matmul(matmul(a_hat, x0), tape.leaf(p.w_g)));
  std::array<Var, 4> w;
  std::array<Var, 4> u;
  std::array<Var, 4> b;
  for (int k = 0; k < 4; ++k) {
    w[static_cast<size_t>(k)] = tape.leaf(p.w[static_cast<size_t>(k)]);
    u[static_cast<size_t>(k)] = tape.leaf(p.u[static_cast<size_t>(k)]);
    b[static_cast<size_t>(k)] = tape.leaf(p.b[static_cast<size_t>(k)]);
  }
  std::vector<Var> next_h;
  std::vector<Var> next_c;
  next_h.reserve(kKeypoints);
  next_c.reserve(kKeypoints);
  for (int i = 0; i < kKeypoints; ++i) {
    Var h_i = row(state.h, i);
    Var c_i = row(*state.c, i);
    Var x_i = row(frame, i);
    auto pre = [&](int k) {
      return add(add(matmul(x_i, w[static_cast<size_t>(k)]), matmul(h_i, u[static_cast<size_t>(k)])),
                 b[static_cast<size_t>(k)]);
    };
    Var f = sigmoid(pre(0));
    Var in = sigmoid(pre(1));
    Var o = sigmoid(pre(2));
    Var g = tanh(pre(3));
    Var c = add(hadamard(f, c_i), hadamard(in, g));
    next_c.push_back(c);
    next_h.push_back(hadamard(o, tanh(c)));
  }
  return GraphState{stack_rows(next_h), stack_rows(next_c)};
}

GraphState cell_step(const GraphState& state, Var x0, Var a_hat, CellParams& p) {
  return std::visit(
      [&](auto& cell) {
        using T = std::decay_t<decltype(cell)>;
        if constexpr (std::is_same_v<T, RgcnParams>) return rgcn_step(state, x0, a_hat, cell);
        else if constexpr (std::is_same_v<T, LgcnParams>) return lgcn_step(state, x0, a_hat, cell);
        else if constexpr (std::is_same_v<T, GcnRnnParams>) return gcn_rnn_step(state, x0, a_hat, cell);
        else return gcn_lstm_step(state, x0, a_hat, cell);
      },
      p);
}

std::vector<GraphState> unroll(CellParams& cell, const TemporalPoseGraph& graph, Tape& tape) {
  if (graph.frames.empty()) throw ArgumentError("unroll: empty graph");
  const int n = hidden_size(cell);
  Var a_hat = tape.constant(graph.adjacency.a_hat);
  const CellKind kind = cell_kind(cell);
  const bool gated = kind == CellKind::lgcn || kind == CellKind::gcn_lstm;

  GraphState state{tape.constant(Matrix(kKeypoints, n)), std::nullopt};
  if (gated) state.c = tape.constant(Matrix(kKeypoints, n));

  std::vector<GraphState> states;
  states.reserve(graph.frames.size());
  for (const auto& frame : graph.frames) {
    Var x0 = tape.constant(frame.coords);
    state = cell_step(state, x0, a_hat, cell);
    states.push_back(state);
  }
  return states;
}

std::vector<Var> hidden_states(const std::vector<GraphState>& states) {
  std::vector<Var> hs;
  hs.reserve(states.size());
  for (const auto& s : states) hs.push_back(s.h);
  return hs;
}

double median_unroll_micros(CellParams& cell, const TemporalPoseGraph& graph, int reps) {
  if (reps < 1) throw ArgumentError("median_unroll_micros: reps must be >= 1");
  // Warm-up pass so allocator and cache state do not bias the first reps.
  {
    Tape tape;
    unroll(cell, graph, tape);
  }
  std::vector<double> times(static_cast<size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    Tape tape;
    unroll(cell, graph, tape);
    const auto stop = std::chrono::steady_clock::now();
    times[static_cast<size_t>(r)] = std::chrono::duration<double, std::micro>(stop - start).count();
  }
  auto mid = times.begin() + reps / 2;
  std::nth_element(times.begin(), mid, times.end());
  return *mid;
}

}  // namespace posergcn
