#pragma once

#include <random>
#include <span>
#include <string>

#include "posergcn/tape.hpp"

namespace posergcn {

enum class Pooling { dam, tam, nam, mean };

std::string to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct AttentionParams {
  int n = 0;
  Param w_node;  // n x 1
  Param w_time;  // n x 1

  static AttentionParams init(int n, std::mt19937_64& rng);
  template <class F>
  void visit(F&& f) {
    f("w_node", w_node);
    f("w_time", w_time);
  }
};

struct AttentionPooled {
  Var weights;  // column of attention weights, sums to 1
  Var pooled;   // 1 x n
};

/// Node attention: time-mean of the hidden states, self-attention scores
/// per node, softmax weights, weighted node sum.
AttentionPooled node_attention(std::span<const Var> states, AttentionParams& p);

/// Time attention: node-mean per frame, self-attention scores per frame,
/// softmax weights, weighted frame sum.
AttentionPooled time_attention(std::span<const Var> states, AttentionParams& p);

/// Dual attention: [node-pooled ; time-pooled], in that fixed order.
Var dam(std::span<const Var> states, AttentionParams& p);

/// Ablation poolers. Each output is duplicated to length 2n so the
/// downstream classifier and retrieval dimension stay constant across the
/// ablation grid.
Var mean_pool(std::span<const Var> states);
Var tam_only(std::span<const Var> states, AttentionParams& p);
Var nam_only(std::span<const Var> states, AttentionParams& p);

Var pool(Pooling kind, std::span<const Var> states, AttentionParams& p);

}  // namespace posergcn
