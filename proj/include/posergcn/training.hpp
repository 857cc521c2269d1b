#pragma once

#include <random>
#include <span>
#include <vector>

#include "posergcn/tape.hpp"

namespace posergcn {

/// Batch-hard triplet loss: per anchor, hinge on (hardest positive
/// distance - hardest negative distance + margin), summed over anchors.
/// Distances are plain Euclidean on the raw features. Anchors without a
/// positive are skipped and counted in `skipped_anchors`; a batch with a
/// single identity is an error.
Var triplet_batch_hard(std::span<const Var> features, std::span<const int> labels, double margin,
                       int* skipped_anchors = nullptr);

struct ClassifierHead {
  Param weight;  // in_dim x classes
  Param bias;    // 1 x classes

  static ClassifierHead init(int in_dim, int classes, std::mt19937_64& rng);
  int classes() const { return weight.value.cols(); }
  int in_dim() const { return weight.value.rows(); }
  template <class F>
  void visit(F&& f) {
    f("weight", weight);
    f("bias", bias);
  }
};

/// Mean softmax cross-entropy of the fused features at the true class.
Var identity_loss(ClassifierHead& head, std::span<const Var> fused, std::span<const int> labels);

/// lambda = l_a / (l_a + l_p), the branch-weighting rule that gives the
/// larger triplet loss the larger coefficient. Defined as 0.5 at (0, 0) by
/// continuity of the symmetric case. Treated as a constant during gradient
/// propagation.
double adaptive_lambda(double l_a, double l_p);

struct LambdaMode {
  bool adaptive = true;
  double fixed_value = 0.5;
};

struct LossReport {
  double l_tri_a = 0.0;
  double l_tri_p = 0.0;
  double l_id = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct BatchLoss {
  LossReport report;
  Var total;
};

/// Assembles the combined objective: identity loss on the fused features
/// plus the lambda-weighted pair of branch triplet losses.
BatchLoss total_loss(std::span<const Var> f_a, std::span<const Var> f_p,
                     std::span<const Var> fused, std::span<const int> labels,
                     ClassifierHead& head, double margin, const LambdaMode& mode,
                     int* skipped_anchors = nullptr);

/// PK batch sampling: P distinct identities, K tracks each. Identities
/// with fewer than K tracks are sampled with replacement (counted in
/// `replacement_draws`). Deterministic given the generator state.
std::vector<int> pk_sample(std::span<const int> track_labels, int P, int K, std::mt19937_64& rng,
                           int* replacement_draws = nullptr);

/// Standard Adam with bias correction; gradients are consumed and reset by
/// each step so Param::grad is zero afterwards.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(double lr);

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

/// Stepwise decay: base_lr * 0.1^floor(epoch / 200).
double lr_schedule(int epoch, double base_lr = 3e-4);

}  // namespace posergcn
