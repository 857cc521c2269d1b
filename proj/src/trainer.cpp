#include "posergcn/trainer.hpp"

#include <ostream>

namespace posergcn {

namespace {

std::vector<Param*> bare_params(Model& model) {
  std::vector<Param*> out;
  for (auto& [name, p] : model.named_params()) out.push_back(p);
  return out;
}

// Distinct stream from the init seed so adding params never shifts batches.
uint64_t batch_seed(uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ull; }

}  // namespace

Trainer::Trainer(Model& model, const PreparedDataset& data)
    : model_(model),
      data_(data),
      params_(bare_params(model)),
      adam_(params_),
      batch_rng_(batch_seed(model.config().seed)) {
  const auto& cfg = model.config();
  const int batch_size = cfg.P * cfg.K;
  steps_per_epoch_ =
      (static_cast<int>(data.tracks.size()) + batch_size - 1) / batch_size;
  if (data.classes < cfg.P)
    throw ArgumentError("trainer: config P=" + std::to_string(cfg.P) + " but dataset has " +
                        std::to_string(data.classes) + " identities");
  if (data.classes != model.classes())
    throw DimensionError("trainer: model head expects " + std::to_string(model.classes()) +
                         " classes, dataset has " + std::to_string(data.classes));
  for (Param* p : params_) p->zero_grad();
}

LossReport Trainer::train_step(double lr) {
  const auto& cfg = model_.config();
  const std::vector<int> all_labels = data_.labels();
  std::vector<int> batch =
      pk_sample(all_labels, cfg.P, cfg.K, batch_rng_, &replacement_draws_);

  Tape tape;
  std::vector<Var> f_a;
  std::vector<Var> f_p;
  std::vector<Var> fused;
  std::vector<int> labels;
  f_a.reserve(batch.size());
  f_p.reserve(batch.size());
  fused.reserve(batch.size());
  labels.reserve(batch.size());
  for (int idx : batch) {
    const auto& track = data_.tracks[static_cast<size_t>(idx)];
    Var a = model_.appearance_feature(tape, track.appearance);
    Var p = model_.pose_feature(tape, track.graph);
    f_a.push_back(a);
    f_p.push_back(p);
    fused.push_back(concat_cols(a, p));
    labels.push_back(track.label);
  }

  BatchLoss loss = total_loss(f_a, f_p, fused, labels, model_.head(), cfg.margin,
                              cfg.lambda_mode, &skipped_anchors_);
  tape.backward(loss.total);
  adam_.step(lr);
  return loss.report;
}

EpochStats Trainer::train_epoch(int epoch, double lr) {
  // One epoch is a dataset-scale pass: ceil(N / PK) batches. The logged
  // stats are the epoch's final step, so per-step invariants (lambda range
  // and coefficient ordering) hold row by row in the CSV.
  LossReport last;
  for (int b = 0; b < steps_per_epoch_; ++b) last = train_step(lr);
  return EpochStats{epoch, lr, last};
}

std::vector<EpochStats> Trainer::run(std::ostream& log) {
  const auto& cfg = model_.config();
  write_log_header(log);
  std::vector<EpochStats> history;
  history.reserve(static_cast<size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = train_epoch(epoch, lr_schedule(epoch, cfg.lr));
    write_log_row(log, stats);
    history.push_back(stats);
  }
  return history;
}

void write_log_header(std::ostream& log) {
  log << "epoch,lr,l_id,l_tri_a,l_tri_p,lambda,total\n";
}

void write_log_row(std::ostream& log, const EpochStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", s.epoch, s.lr,
                s.loss.l_id, s.loss.l_tri_a, s.loss.l_tri_p, s.loss.lambda, s.loss.total);
  log << buf;
}

}  // namespace posergcn
