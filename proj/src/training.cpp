#include "posergcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "posergcn/cells.hpp"

namespace posergcn {

Var triplet_batch_hard(std::span<const Var> features, std::span<const int> labels, double margin,
                       int* skipped_anchors) {
  const int n = static_cast<int>(features.size());
  if (n == 0) throw ArgumentError("triplet_batch_hard: empty batch");
  if (labels.size() != features.size())
    throw ArgumentError("triplet_batch_hard: labels/features size mismatch");
  if (margin < 0.0) throw ArgumentError("triplet_batch_hard: negative margin");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw ArgumentError("triplet_batch_hard: batch holds a single identity");

  Tape& tape = *features.front().tape;

  // Pairwise distances, computed once and shared between anchors.
  std::vector<std::vector<Var>> dist(static_cast<size_t>(n), std::vector<Var>(static_cast<size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Var d = euclidean(features[static_cast<size_t>(i)], features[static_cast<size_t>(j)]);
      dist[static_cast<size_t>(i)][static_cast<size_t>(j)] = d;
      dist[static_cast<size_t>(j)][static_cast<size_t>(i)] = d;
    }
  auto dval = [&](int i, int j) { return dist[static_cast<size_t>(i)][static_cast<size_t>(j)].value()(0, 0); };

  Var margin_c = tape.constant(Matrix(1, 1, margin));
  Var loss = tape.constant(Matrix(1, 1));
  for (int i = 0; i < n; ++i) {
    int hardest_pos = -1;
    int hardest_neg = -1;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        if (hardest_pos < 0 || dval(i, j) > dval(i, hardest_pos)) hardest_pos = j;
      } else {
        if (hardest_neg < 0 || dval(i, j) < dval(i, hardest_neg)) hardest_neg = j;
      }
    }
    if (hardest_pos < 0) {
      if (skipped_anchors) ++*skipped_anchors;
      continue;
    }
    Var pos = dist[static_cast<size_t>(i)][static_cast<size_t>(hardest_pos)];
    Var neg = dist[static_cast<size_t>(i)][static_cast<size_t>(hardest_neg)];
    loss = add(loss, relu(add(margin_c, sub(pos, neg))));
  }
  return loss;
}

ClassifierHead ClassifierHead::init(int in_dim, int classes, std::mt19937_64& rng) {
  if (in_dim < 1 || classes < 1) throw ArgumentError("classifier head: dimensions must be >= 1");
  ClassifierHead head;
  head.weight = Param(init_uniform(in_dim, classes, in_dim, rng));
  head.bias = Param(init_uniform(1, classes, in_dim, rng));
  return head;
}

Var identity_loss(ClassifierHead& head, std::span<const Var> fused, std::span<const int> labels) {
  if (fused.empty()) throw ArgumentError("identity_loss: empty batch");
  if (fused.size() != labels.size())
    throw ArgumentError("identity_loss: labels/features size mismatch");
  const int classes = head.classes();
  for (int label : labels)
    if (label < 0 || label >= classes)
      throw ArgumentError("identity_loss: label " + std::to_string(label) + " out of range [0, " +
                          std::to_string(classes) + ")");

  Tape& tape = *fused.front().tape;
  Var w = tape.leaf(head.weight);
  Var b = tape.leaf(head.bias);
  Var acc = tape.constant(Matrix(1, 1));
  for (size_t i = 0; i < fused.size(); ++i) {
    Var logits = add(matmul(fused[i], w), b);
    acc = add(acc, cross_entropy(logits, labels[i]));
  }
  return scale(acc, 1.0 / static_cast<double>(fused.size()));
}

double adaptive_lambda(double l_a, double l_p) {
  if (l_a < 0.0 || l_p < 0.0) throw ArgumentError("adaptive_lambda: losses must be nonnegative");
  if (l_a == 0.0 && l_p == 0.0) return 0.5;
  return l_a / (l_a + l_p);
}

BatchLoss total_loss(std::span<const Var> f_a, std::span<const Var> f_p,
                     std::span<const Var> fused, std::span<const int> labels,
                     ClassifierHead& head, double margin, const LambdaMode& mode,
                     int* skipped_anchors) {
  Var l_tri_a = triplet_batch_hard(f_a, labels, margin, skipped_anchors);
  Var l_tri_p = triplet_batch_hard(f_p, labels, margin, skipped_anchors);
  Var l_id = identity_loss(head, fused, labels);

  LossReport report;
  report.l_tri_a = l_tri_a.value()(0, 0);
  report.l_tri_p = l_tri_p.value()(0, 0);
  report.l_id = l_id.value()(0, 0);
  report.lambda =
      mode.adaptive ? adaptive_lambda(report.l_tri_a, report.l_tri_p) : mode.fixed_value;
  report.total = report.l_id + report.lambda * report.l_tri_a +
                 (1.0 - report.lambda) * report.l_tri_p;

  Var total = add(add(l_id, scale(l_tri_a, report.lambda)), scale(l_tri_p, 1.0 - report.lambda));
  return BatchLoss{report, total};
}

std::vector<int> pk_sample(std::span<const int> track_labels, int P, int K, std::mt19937_64& rng,
                           int* replacement_draws) {
  if (P < 1 || K < 1) throw ArgumentError("pk_sample: P and K must be >= 1");

  std::vector<int> ids;
  std::vector<std::vector<int>> tracks_by_id;
  for (size_t t = 0; t < track_labels.size(); ++t) {
    const int label = track_labels[t];
    auto it = std::find(ids.begin(), ids.end(), label);
    size_t idx;
    if (it == ids.end()) {
      ids.push_back(label);
      tracks_by_id.emplace_back();
      idx = ids.size() - 1;
    } else {
      idx = static_cast<size_t>(it - ids.begin());
    }
    tracks_by_id[idx].push_back(static_cast<int>(t));
  }
  if (static_cast<int>(ids.size()) < P)
    throw ArgumentError("pk_sample: need " + std::to_string(P) + " identities, dataset has " +
                        std::to_string(ids.size()));

  // Choose P identities by partial shuffle of the id index list.
  std::vector<size_t> order(ids.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = 0; i < static_cast<size_t>(P); ++i) {
    std::uniform_int_distribution<size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<int> batch;
  batch.reserve(static_cast<size_t>(P) * static_cast<size_t>(K));
  for (int p = 0; p < P; ++p) {
    auto& tracks = tracks_by_id[order[static_cast<size_t>(p)]];
    if (static_cast<int>(tracks.size()) >= K) {
      std::vector<int> pool = tracks;
      for (int k = 0; k < K; ++k) {
        std::uniform_int_distribution<size_t> pick(static_cast<size_t>(k), pool.size() - 1);
        std::swap(pool[static_cast<size_t>(k)], pool[pick(rng)]);
        batch.push_back(pool[static_cast<size_t>(k)]);
      }
    } else {
      for (int k = 0; k < K; ++k) {
        std::uniform_int_distribution<size_t> pick(0, tracks.size() - 1);
        batch.push_back(tracks[pick(rng)]);
        if (replacement_draws) ++*replacement_draws;
      }
    }
  }
  return batch;
}

Adam::Adam(std::vector<Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    for (int k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i][k] / bc1;
      const double v_hat = v_[i][k] / bc2;
      p.value[k] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
    }
    p.zero_grad();
  }
}

double lr_schedule(int epoch, double base_lr) {
  if (epoch < 0) throw ArgumentError("lr_schedule: negative epoch");
  return base_lr * std::pow(0.1, static_cast<double>(epoch / 200));
}

}  // namespace posergcn
