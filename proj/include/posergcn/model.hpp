#pragma once

#include <filesystem>
#include <optional>

#include "posergcn/appearance.hpp"
#include "posergcn/attention.hpp"
#include "posergcn/cells.hpp"
#include "posergcn/checkpoint.hpp"
#include "posergcn/config.hpp"
#include "posergcn/evaldata.hpp"

namespace posergcn {

/// A dataset track ready for the model: pose graph truncated to the
/// configured clip length, per-frame appearance features, labels.
struct PreparedTrack {
  std::string track_id;
  int identity = 0;  // raw dataset identity
  int label = 0;     // contiguous class index
  int camera = 0;
  TemporalPoseGraph graph;
  Matrix appearance;  // T' x d
};

struct PreparedDataset {
  std::vector<PreparedTrack> tracks;
  int classes = 0;
  int feature_dim = 0;

  std::vector<int> labels() const;
};

/// Loads a JSONL dataset and normalizes it for a clip length T. Appearance
/// features come from the embedded per-frame vectors or, when absent, from
/// `<track_id>.apft` files next to the dataset (or in `appearance_dir`).
PreparedDataset prepare_dataset(const std::filesystem::path& jsonl, int T,
                                const std::optional<std::filesystem::path>& appearance_dir = {});

/// The two-branch model: a temporal graph cell plus dual attention for the
/// pose feature, an aggregator for the appearance feature, and a classifier
/// head over the fused feature.
class Model {
 public:
  Model(const RunConfig& cfg, int classes, int feature_dim);

  Var pose_feature(Tape& tape, const TemporalPoseGraph& graph);
  Var appearance_feature(Tape& tape, const Matrix& frame_feats);

  /// Params keyed module/name, in a fixed registration order.
  std::vector<std::pair<std::string, Param*>> named_params();

  void load(const Checkpoint& ck);

  const RunConfig& config() const { return cfg_; }
  int classes() const { return head_.classes(); }
  int feature_dim() const { return feature_dim_; }
  int pose_dim() const { return 2 * cfg_.n; }
  CellParams& cell() { return cell_; }
  AttentionParams& attention() { return attention_; }
  ClassifierHead& head() { return head_; }

 private:
  RunConfig cfg_;
  int feature_dim_ = 0;
  CellParams cell_;
  AttentionParams attention_;
  std::optional<AaParams> aa_;
  std::optional<RaParams> ra_;
  ClassifierHead head_;
};

/// Per-track embeddings of a prepared dataset, one row per track.
struct EmbeddingTable {
  Matrix appearance;  // N x d
  Matrix pose;        // N x 2n
  Matrix fused;       // N x (d + 2n)
};

EmbeddingTable embed_tracks(Model& model, const PreparedDataset& data);

enum class Branch { appearance, pose, fused };

std::string to_string(Branch b);
Branch branch_from_string(const std::string& s);

/// Retrieval set over one dataset: every track is both query and gallery;
/// the same-identity same-camera rule hides each query from itself.
RetrievalSet retrieval_set(const EmbeddingTable& table, const PreparedDataset& data, Branch branch,
                           bool l2_normalize = false);

}  // namespace posergcn
