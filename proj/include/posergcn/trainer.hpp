#pragma once

#include <iosfwd>

#include "posergcn/model.hpp"

namespace posergcn {

/// One row of the training log CSV.
struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  LossReport loss;
};

/// Single-threaded training loop. An epoch is one dataset-scale pass of
/// PK batches (ceil(N / PK) steps), each step one combined loss and one
/// Adam update. Deterministic for a fixed config and dataset.
class Trainer {
 public:
  Trainer(Model& model, const PreparedDataset& data);

  /// Runs all epochs, streaming CSV rows (epoch, lr, l_id, l_tri_a,
  /// l_tri_p, lambda, total) to `log`, header included.
  std::vector<EpochStats> run(std::ostream& log);

  int skipped_anchors() const { return skipped_anchors_; }
  int replacement_draws() const { return replacement_draws_; }

 private:
  LossReport train_step(double lr);
  EpochStats train_epoch(int epoch, double lr);

  Model& model_;
  const PreparedDataset& data_;
  std::vector<Param*> params_;
  Adam adam_;
  std::mt19937_64 batch_rng_;
  int steps_per_epoch_ = 1;
  int skipped_anchors_ = 0;
  int replacement_draws_ = 0;
};

void write_log_header(std::ostream& log);
void write_log_row(std::ostream& log, const EpochStats& stats);

}  // namespace posergcn
