#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "posergcn/posegraph.hpp"
#include "posergcn/tape.hpp"

namespace posergcn {

enum class CellKind { rgcn, lgcn, gcn_rnn, gcn_lstm };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& s);

/// Hidden state of the whole graph after one step: h is 14xn, c carries the
/// cell memory for the LSTM-gated variants.
struct GraphState {
  Var h;
  std::optional<Var> c;
};

/// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] initialization. Keeps tanh
/// pre-activations in the linear regime at the start of training.
Matrix init_uniform(int rows, int cols, int fan_in, std::mt19937_64& rng);

/// Recurrent graph-convolutional cell. The hidden state of the entire
/// graph recurs through w_h while the graph term shares w_x between the
/// graph convolution and the recurrent input projection. With multiple
/// layers the graph term applies a_hat repeatedly and composes the w_x
/// factors inside a single relu.
struct RgcnParams {
  int n = 0;
  Param w_h;                // n x n
  std::vector<Param> w_x;   // [0] 2 x n, deeper layers n x n
  Param b;                  // 1 x n, broadcast over the 14 rows

  static RgcnParams init(int n, int layers, std::mt19937_64& rng);
  int layer_count() const { return static_cast<int>(w_x.size()); }
  int param_count() const;
  template <class F>
  void visit(F&& f) {
    f("w_h", w_h);
    for (size_t l = 0; l < w_x.size(); ++l) f("w_x" + std::to_string(l + 1), w_x[l]);
    f("b", b);
  }
};

/// LSTM-gated variant: every gate feeds on the graph convolution of the
/// raw coordinates plus the recurrent graph state.
struct LgcnParams {
  int n = 0;
  std::array<Param, 4> w;  // gate order f, i, o, g; each 2 x n
  std::array<Param, 4> u;  // each n x n
  std::array<Param, 4> b;  // each 1 x n

  static LgcnParams init(int n, std::mt19937_64& rng);
  int param_count() const;
  template <class F>
  void visit(F&& f) {
    static constexpr const char* kGate[] = {"f", "i", "o", "g"};
    for (int k = 0; k < 4; ++k) {
      f(std::string("w_") + kGate[k], w[static_cast<size_t>(k)]);
      f(std::string("u_") + kGate[k], u[static_cast<size_t>(k)]);
      f(std::string("b_") + kGate[k], b[static_cast<size_t>(k)]);
    }
  }
};

/// Baseline: frame-level GCN followed by a vanilla RNN applied to the
/// nodes one at a time, with separate graph and recurrent projections.
struct GcnRnnParams {
  int n = 0;
  Param w_g;  // 2 x n
  Param w_h;  // n x n
  Param w_x;  // n x n
  Param b;    // 1 x n

  static GcnRnnParams init(int n, std::mt19937_64& rng);
  int param_count() const;
  template <class F>
  void visit(F&& f) {
    f("w_g", w_g);
    f("w_h", w_h);
    f("w_x", w_x);
    f("b", b);
  }
};

/// Baseline: frame-level GCN followed by a per-node standard LSTM cell.
struct GcnLstmParams {
  int n = 0;
  Param w_g;               // 2 x n
  std::array<Param, 4> w;  // gate order f, i, o, g; each n x n
  std::array<Param, 4> u;  // each n x n
  std::array<Param, 4> b;  // each 1 x n

  static GcnLstmParams init(int n, std::mt19937_64& rng);
  int param_count() const;
  template <class F>
  void visit(F&& f) {
    f("w_g", w_g);
    static constexpr const char* kGate[] = {"f", "i", "o", "g"};
    for (int k = 0; k < 4; ++k) {
      f(std::string("w_") + kGate[k], w[static_cast<size_t>(k)]);
      f(std::string("u_") + kGate[k], u[static_cast<size_t>(k)]);
      f(std::string("b_") + kGate[k], b[static_cast<size_t>(k)]);
    }
  }
};

using CellParams = std::variant<RgcnParams, LgcnParams, GcnRnnParams, GcnLstmParams>;

CellParams make_cell(CellKind kind, int n, int layers, std::mt19937_64& rng);
CellKind cell_kind(const CellParams& cell);
int param_count(const CellParams& cell);
int hidden_size(const CellParams& cell);

template <class F>
void visit_params(CellParams& cell, F&& f) {
  std::visit([&](auto& p) { p.visit(f); }, cell);
}

GraphState rgcn_step(const GraphState& state, Var x0, Var a_hat, RgcnParams& p);
GraphState lgcn_step(const GraphState& state, Var x0, Var a_hat, LgcnParams& p);
GraphState gcn_rnn_step(const GraphState& state, Var x0, Var a_hat, GcnRnnParams& p);
GraphState gcn_lstm_step(const GraphState& state, Var x0, Var a_hat, GcnLstmParams& p);

GraphState cell_step(const GraphState& state, Var x0, Var a_hat, CellParams& p);

/// Runs the cell left to right from an all-zero state and returns all T
/// graph states.
std::vector<GraphState> unroll(CellParams& cell, const TemporalPoseGraph& graph, Tape& tape);

/// Hidden-state Vars of an unroll, in frame order.
std::vector<Var> hidden_states(const std::vector<GraphState>& states);

/// Median wall-clock of a full unroll over `reps` repetitions, in
/// microseconds. Medians rather than means: the distributions are
/// long-tailed at this scale.
double median_unroll_micros(CellParams& cell, const TemporalPoseGraph& graph, int reps);

}  // namespace posergcn
