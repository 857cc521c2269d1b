#include "posergcn/attention.hpp"

#include "posergcn/cells.hpp"

namespace posergcn {

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::dam: return "dam";
    case Pooling::tam: return "tam";
    case Pooling::nam: return "nam";
    case Pooling::mean: return "mean";
  }
  return "?";
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "dam") return Pooling::dam;
  if (s == "tam") return Pooling::tam;
  if (s == "nam") return Pooling::nam;
  if (s == "mean") return Pooling::mean;
  throw ArgumentError("unknown pooling: " + s);
}

AttentionParams AttentionParams::init(int n, std::mt19937_64& rng) {
  AttentionParams p;
  p.n = n;
  p.w_node = Param(init_uniform(n, 1, n, rng));
  p.w_time = Param(init_uniform(n, 1, n, rng));
  return p;
}

namespace {

Var time_mean(std::span<const Var> states) {
  if (states.empty()) throw ArgumentError("attention: empty state list");
  Var acc = states[0];
  for (size_t t = 1; t < states.size(); ++t) acc = add(acc, states[t]);
  return scale(acc, 1.0 / static_cast<double>(states.size()));
}

}  // namespace

AttentionPooled node_attention(std::span<const Var> states, AttentionParams& p) {
  Tape& tape = *states.front().tape;
  Var h_bar = time_mean(states);                       // 14 x n
  Var scores = matmul(h_bar, tape.leaf(p.w_node));     // 14 x 1
  Var weights = softmax_col(scores);
  Var pooled = matmul(transpose(weights), h_bar);      // 1 x n
  return AttentionPooled{weights, pooled};
}

AttentionPooled time_attention(std::span<const Var> states, AttentionParams& p) {
  if (states.empty()) throw ArgumentError("attention: empty state list");
  Tape& tape = *states.front().tape;
  std::vector<Var> frame_means;
  frame_means.reserve(states.size());
  for (const Var& h : states) frame_means.push_back(rows_mean(h));  // each 1 x n
  Var stacked = stack_rows(frame_means);                            // T x n
  Var scores = matmul(stacked, tape.leaf(p.w_time));                // T x 1
  Var weights = softmax_col(scores);
  Var pooled = matmul(transpose(weights), stacked);                 // 1 x n
  return AttentionPooled{weights, pooled};
}

Var dam(std::span<const Var> states, AttentionParams& p) {
  Var node = node_attention(states, p).pooled;
  Var time = time_attention(states, p).pooled;
  return concat_cols(node, time);
}

Var mean_pool(std::span<const Var> states) {
  Var global = rows_mean(time_mean(states));  // 1 x n
  return concat_cols(global, global);
}

Var tam_only(std::span<const Var> states, AttentionParams& p) {
  Var time = time_attention(states, p).pooled;
  return concat_cols(time, time);
}

Var nam_only(std::span<const Var> states, AttentionParams& p) {
  Var node = node_attention(states, p).pooled;
  return concat_cols(node, node);
}

Var pool(Pooling kind, std::span<const Var> states, AttentionParams& p) {
  switch (kind) {
    case Pooling::dam: return dam(states, p);
    case Pooling::tam: return tam_only(states, p);
    case Pooling::nam: return nam_only(states, p);
    case Pooling::mean: return mean_pool(states);
  }
  throw ArgumentError("unknown pooling");
}

}  // namespace posergcn
