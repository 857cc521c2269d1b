#include "posergcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace posergcn {

std::vector<int> PreparedDataset::labels() const {
  std::vector<int> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) out.push_back(t.label);
  return out;
}

PreparedDataset prepare_dataset(const std::filesystem::path& jsonl, int T,
                                const std::optional<std::filesystem::path>& appearance_dir) {
  if (T < 1) throw ArgumentError("prepare_dataset: T must be >= 1");
  std::vector<TrackRecord> records = read_jsonl(jsonl);
  if (records.empty()) throw ArgumentError("prepare_dataset: dataset is empty");

  std::map<int, int> label_of;
  for (const auto& r : records) label_of.emplace(r.identity, 0);
  int next = 0;
  for (auto& [identity, label] : label_of) label = next++;

  const std::filesystem::path sidecar_dir =
      appearance_dir ? *appearance_dir : jsonl.parent_path();

  PreparedDataset data;
  data.classes = next;
  data.tracks.reserve(records.size());
  for (auto& r : records) {
    if (r.frames.empty()) throw ArgumentError("track " + r.track_id + ": no frames");
    const int use = std::min<int>(T, static_cast<int>(r.frames.size()));

    PreparedTrack track;
    track.track_id = r.track_id;
    track.identity = r.identity;
    track.label = label_of.at(r.identity);
    track.camera = r.camera;

    std::vector<PoseFrame> frames;
    frames.reserve(static_cast<size_t>(use));
    for (int t = 0; t < use; ++t)
      frames.push_back(frame_from_detection(r.frames[static_cast<size_t>(t)].keypoints,
                                            r.frames[static_cast<size_t>(t)].bbox));
    track.graph = build_temporal_graph(std::move(frames));

    const bool embedded = !r.frames.front().appearance.empty();
    if (embedded) {
      const int d = static_cast<int>(r.frames.front().appearance.size());
      track.appearance = Matrix(use, d);
      for (int t = 0; t < use; ++t) {
        const auto& a = r.frames[static_cast<size_t>(t)].appearance;
        if (static_cast<int>(a.size()) != d)
          throw ArgumentError("track " + r.track_id + ": appearance dim varies across frames");
        for (int c = 0; c < d; ++c) track.appearance(t, c) = a[static_cast<size_t>(c)];
      }
    } else {
      const auto apft = sidecar_dir / (r.track_id + ".apft");
      Matrix feats = read_apft(apft);
      const int use_a = std::min(use, feats.rows());
      track.appearance = Matrix(use_a, feats.cols());
      for (int t = 0; t < use_a; ++t)
        for (int c = 0; c < feats.cols(); ++c) track.appearance(t, c) = feats(t, c);
    }

    if (data.feature_dim == 0) data.feature_dim = track.appearance.cols();
    else if (data.feature_dim != track.appearance.cols())
      throw DimensionError("track " + r.track_id + ": appearance dim " +
                           std::to_string(track.appearance.cols()) + " differs from dataset dim " +
                           std::to_string(data.feature_dim));
    data.tracks.push_back(std::move(track));
  }
  return data;
}

Model::Model(const RunConfig& cfg, int classes, int feature_dim)
    : cfg_(cfg),
      feature_dim_(feature_dim),
      cell_(RgcnParams{}),
      head_() {
  if (feature_dim != cfg.d)
    throw DimensionError("model: config d=" + std::to_string(cfg.d) + " but dataset features are " +
                         std::to_string(feature_dim) + "-dimensional");
  std::mt19937_64 rng(cfg.seed);
  cell_ = make_cell(cfg.cell, cfg.n, cfg.layers, rng);
  attention_ = AttentionParams::init(cfg.n, rng);
  if (cfg.aggregator == Aggregator::aa) aa_ = AaParams::init(cfg.d, rng);
  if (cfg.aggregator == Aggregator::ra) ra_ = RaParams::init(cfg.d, rng);
  head_ = ClassifierHead::init(cfg.d + 2 * cfg.n, classes, rng);
}

Var Model::pose_feature(Tape& tape, const TemporalPoseGraph& graph) {
  std::vector<GraphState> states = unroll(cell_, graph, tape);
  std::vector<Var> hs = hidden_states(states);
  return pool(cfg_.pooling, hs, attention_);
}

Var Model::appearance_feature(Tape& tape, const Matrix& frame_feats) {
  if (frame_feats.cols() != cfg_.d)
    throw DimensionError("appearance_feature: frames are " + shape_str(frame_feats) +
                         " but model expects d=" + std::to_string(cfg_.d));
  Var frames = tape.constant(frame_feats);
  switch (cfg_.aggregator) {
    case Aggregator::ap: return ap(frames);
    case Aggregator::aa: return aa(frames, *aa_);
    case Aggregator::ra: return ra(frames, *ra_);
  }
  throw ArgumentError("unknown aggregator");
}

std::vector<std::pair<std::string, Param*>> Model::named_params() {
  std::vector<std::pair<std::string, Param*>> out;
  auto push = [&](const std::string& module) {
    return [&out, module](const std::string& name, Param& p) { out.emplace_back(module + "/" + name, &p); };
  };
  visit_params(cell_, push("cell"));
  attention_.visit(push("attention"));
  if (aa_) aa_->visit(push("aggregator"));
  if (ra_) ra_->visit(push("aggregator"));
  head_.visit(push("head"));
  return out;
}

void Model::load(const Checkpoint& ck) {
  for (auto& [name, param] : named_params()) {
    const Matrix* m = ck.find(name);
    if (!m) throw ArgumentError("checkpoint: missing entry " + name);
    if (!m->same_shape(param->value))
      throw DimensionError("checkpoint: " + name + " is " + shape_str(*m) + ", model expects " +
                           shape_str(param->value));
    param->value = *m;
    param->zero_grad();
  }
}

EmbeddingTable embed_tracks(Model& model, const PreparedDataset& data) {
  const int n_tracks = static_cast<int>(data.tracks.size());
  EmbeddingTable table{Matrix(n_tracks, model.feature_dim()), Matrix(n_tracks, model.pose_dim()),
                       Matrix(n_tracks, model.feature_dim() + model.pose_dim())};
  for (int i = 0; i < n_tracks; ++i) {
    Tape tape;
    const auto& track = data.tracks[static_cast<size_t>(i)];
    Var f_a = model.appearance_feature(tape, track.appearance);
    Var f_p = model.pose_feature(tape, track.graph);
    const Matrix& va = f_a.value();
    const Matrix& vp = f_p.value();
    for (int c = 0; c < va.cols(); ++c) {
      table.appearance(i, c) = va(0, c);
      table.fused(i, c) = va(0, c);
    }
    for (int c = 0; c < vp.cols(); ++c) {
      table.pose(i, c) = vp(0, c);
      table.fused(i, va.cols() + c) = vp(0, c);
    }
  }
  return table;
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::appearance: return "appearance";
    case Branch::pose: return "pose";
    case Branch::fused: return "fused";
  }
  return "?";
}

Branch branch_from_string(const std::string& s) {
  if (s == "appearance") return Branch::appearance;
  if (s == "pose") return Branch::pose;
  if (s == "fused") return Branch::fused;
  throw ArgumentError("unknown branch: " + s);
}

RetrievalSet retrieval_set(const EmbeddingTable& table, const PreparedDataset& data, Branch branch,
                           bool l2_normalize) {
  const Matrix* feats = nullptr;
  switch (branch) {
    case Branch::appearance: feats = &table.appearance; break;
    case Branch::pose: feats = &table.pose; break;
    case Branch::fused: feats = &table.fused; break;
  }
  Matrix embedded = *feats;
  if (l2_normalize) {
    for (int i = 0; i < embedded.rows(); ++i) {
      double norm = 0.0;
      for (int c = 0; c < embedded.cols(); ++c) norm += embedded(i, c) * embedded(i, c);
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (int c = 0; c < embedded.cols(); ++c) embedded(i, c) /= norm;
    }
  }

  RetrievalSet set;
  set.query_feats = embedded;
  set.gallery_feats = std::move(embedded);
  for (const auto& t : data.tracks) {
    set.query_labels.push_back(t.label);
    set.query_cams.push_back(t.camera);
  }
  set.gallery_labels = set.query_labels;
  set.gallery_cams = set.query_cams;
  return set;
}

}  // namespace posergcn
