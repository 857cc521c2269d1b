#pragma once

#include <cstdint>
#include <vector>

#include "posergcn/posegraph.hpp"

namespace posergcn {

/// One synthetic walker: body proportions plus gait dynamics, and an
/// appearance centroid that the ambiguity knob can collapse across
/// identities.
struct SyntheticIdentity {
  double torso = 0.0;
  double upper_arm = 0.0;
  double lower_arm = 0.0;
  double upper_leg = 0.0;
  double lower_leg = 0.0;
  double gait_frequency = 0.0;  // radians per frame
  double gait_amplitude = 0.0;  // leg swing, radians
  double phase = 0.0;
  std::vector<double> appearance_centroid;
};

struct SynthSpec {
  int n_ids = 20;
  int tracks_per_id = 8;
  int frames = 10;
  double occlusion_rate = 0.1;
  double appearance_ambiguity = 0.0;  // 0 = per-identity centroids, 1 = one shared centroid
  uint64_t seed = 42;
  int feature_dim = 64;
  int cameras = 2;
};

/// Kinematic gait generator: hips bob sinusoidally, limbs swing by forward
/// kinematics from the identity's proportions, Gaussian jitter sigma 0.01,
/// keypoints hidden independently with the occlusion rate. Appearance
/// features are the identity centroid plus per-frame Gaussian noise
/// sigma 0.1. Byte-identical output for equal specs.
std::vector<TrackRecord> synth_tracks(const SynthSpec& spec);

/// AP over an ordered 0/1 relevance list: mean over relevant positions of
/// (relevant seen so far / position).
double average_precision(const std::vector<int>& relevance);

struct CmcCurve {
  double rank1 = 0.0;
  double rank5 = 0.0;
  double rank20 = 0.0;
};

/// Rank-k = fraction of queries whose first relevant hit is at position
/// <= k. Positions are 1-based; 0 marks a query with no hit at all.
CmcCurve cmc(const std::vector<int>& first_hit_positions);

struct RetrievalSet {
  Matrix query_feats;
  std::vector<int> query_labels;
  std::vector<int> query_cams;
  Matrix gallery_feats;
  std::vector<int> gallery_labels;
  std::vector<int> gallery_cams;
};

struct QueryRanking {
  std::vector<int> gallery_indices;  // ascending distance, ties by index
  std::vector<int> relevance;
};

/// Euclidean ranking with the standard same-identity same-camera gallery
/// exclusion. Ties break by gallery index.
std::vector<QueryRanking> retrieve(const RetrievalSet& set);

struct RetrievalMetrics {
  double map = 0.0;
  CmcCurve curve;
  int skipped_queries = 0;  // queries with no relevant gallery item
};

RetrievalMetrics evaluate_retrieval(const RetrievalSet& set);

}  // namespace posergcn
