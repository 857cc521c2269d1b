#include "posergcn/evaldata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace posergcn {

namespace {

constexpr double kPi = 3.14159265358979323846;

SyntheticIdentity sample_identity(int feature_dim, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  SyntheticIdentity id;
  id.torso = uni(0.30, 0.42);
  id.upper_arm = uni(0.14, 0.22);
  id.lower_arm = uni(0.14, 0.22);
  id.upper_leg = uni(0.20, 0.30);
  id.lower_leg = uni(0.20, 0.30);
  id.gait_frequency = uni(0.35, 0.75);
  id.gait_amplitude = uni(0.10, 0.35);
  id.phase = uni(0.0, 2.0 * kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  id.appearance_centroid.resize(static_cast<size_t>(feature_dim));
  for (double& v : id.appearance_centroid) v = gauss(rng);
  return id;
}

// Keypoint positions in the body frame (x right, y down, roughly [-1, 1]).
// Order matches the canonical skeleton: head, neck, R shoulder, R elbow,
// R wrist, L shoulder, L elbow, L wrist, R hip, R knee, R ankle, L hip,
// L knee, L ankle.
std::array<std::array<double, 2>, kKeypoints> walker_pose(const SyntheticIdentity& id, int t,
                                                          double track_phase) {
  const double ph = id.phase + track_phase;
  const double swing = id.gait_amplitude * std::sin(id.gait_frequency * t + ph);
  const double bob = 0.02 * std::sin(2.0 * (id.gait_frequency * t + ph));

  const double pelvis_y = 0.25 + bob;
  const double neck_y = pelvis_y - id.torso * 1.4;
  const double head_y = neck_y - id.torso * 0.45;
  const double shoulder_dx = 0.16;
  const double hip_dx = 0.10;

  auto limb = [](double ox, double oy, double len, double angle) {
    return std::array<double, 2>{ox + len * std::sin(angle), oy + len * std::cos(angle)};
  };

  std::array<std::array<double, 2>, kKeypoints> p{};
  p[0] = {0.0, head_y};
  p[1] = {0.0, neck_y};

  // Arms swing in opposition to the same-side leg, with a lagged forearm.
  const double arm_r = 0.7 * id.gait_amplitude * std::sin(id.gait_frequency * t + ph + kPi);
  const double arm_l = 0.7 * id.gait_amplitude * std::sin(id.gait_frequency * t + ph);
  p[2] = {shoulder_dx, neck_y + 0.02};
  p[3] = limb(p[2][0], p[2][1], id.upper_arm, arm_r);
  p[4] = limb(p[3][0], p[3][1], id.lower_arm, 0.9 * arm_r + 0.15);
  p[5] = {-shoulder_dx, neck_y + 0.02};
  p[6] = limb(p[5][0], p[5][1], id.upper_arm, arm_l);
  p[7] = limb(p[6][0], p[6][1], id.lower_arm, 0.9 * arm_l + 0.15);

  const double leg_r = swing;
  const double leg_l = id.gait_amplitude * std::sin(id.gait_frequency * t + ph + kPi);
  const double shank_r = id.gait_amplitude * std::sin(id.gait_frequency * t + ph - 0.6);
  const double shank_l = id.gait_amplitude * std::sin(id.gait_frequency * t + ph + kPi - 0.6);
  p[8] = {hip_dx, pelvis_y};
  p[9] = limb(p[8][0], p[8][1], id.upper_leg, leg_r);
  p[10] = limb(p[9][0], p[9][1], id.lower_leg, shank_r);
  p[11] = {-hip_dx, pelvis_y};
  p[12] = limb(p[11][0], p[11][1], id.upper_leg, leg_l);
  p[13] = limb(p[12][0], p[12][1], id.lower_leg, shank_l);
  return p;
}

}  // namespace

std::vector<TrackRecord> synth_tracks(const SynthSpec& spec) {
  if (spec.n_ids < 2) throw ArgumentError("synth_tracks: need at least 2 identities");
  if (spec.tracks_per_id < 1) throw ArgumentError("synth_tracks: tracks_per_id must be >= 1");
  if (spec.frames < 1) throw ArgumentError("synth_tracks: frames must be >= 1");
  if (spec.occlusion_rate < 0.0 || spec.occlusion_rate >= 1.0)
    throw ArgumentError("synth_tracks: occlusion_rate must lie in [0, 1)");
  if (spec.appearance_ambiguity < 0.0 || spec.appearance_ambiguity > 1.0)
    throw ArgumentError("synth_tracks: appearance_ambiguity must lie in [0, 1]");
  if (spec.cameras < 1) throw ArgumentError("synth_tracks: cameras must be >= 1");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> shared_centroid(static_cast<size_t>(spec.feature_dim));
  for (double& v : shared_centroid) v = gauss(rng);

  std::vector<SyntheticIdentity> ids;
  ids.reserve(static_cast<size_t>(spec.n_ids));
  for (int i = 0; i < spec.n_ids; ++i) {
    SyntheticIdentity id = sample_identity(spec.feature_dim, rng);
    for (size_t k = 0; k < id.appearance_centroid.size(); ++k)
      id.appearance_centroid[k] = (1.0 - spec.appearance_ambiguity) * id.appearance_centroid[k] +
                                  spec.appearance_ambiguity * shared_centroid[k];
    ids.push_back(std::move(id));
  }

  const BoundingBox bbox{0.0, 0.0, 128.0, 256.0};
  std::uniform_real_distribution<double> occl(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);

  std::vector<TrackRecord> tracks;
  tracks.reserve(static_cast<size_t>(spec.n_ids) * static_cast<size_t>(spec.tracks_per_id));
  for (int i = 0; i < spec.n_ids; ++i) {
    for (int k = 0; k < spec.tracks_per_id; ++k) {
      TrackRecord track;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "id%03d_t%02d", i, k);
      track.track_id = buf;
      track.identity = i;
      track.camera = k % spec.cameras;
      const double track_phase = phase_dist(rng);
      for (int t = 0; t < spec.frames; ++t) {
        FrameRecord frame;
        frame.bbox = bbox;
        auto pose = walker_pose(ids[static_cast<size_t>(i)], t, track_phase);
        for (int j = 0; j < kKeypoints; ++j) {
          const double jx = pose[static_cast<size_t>(j)][0] + 0.01 * gauss(rng);
          const double jy = pose[static_cast<size_t>(j)][1] + 0.01 * gauss(rng);
          const bool hidden = occl(rng) < spec.occlusion_rate;
          if (hidden) continue;
          // Body frame [-1, 1] to bbox pixels.
          frame.keypoints[static_cast<size_t>(j)] =
              DetectedKeypoint{bbox.x + (jx + 1.0) / 2.0 * bbox.w, bbox.y + (jy + 1.0) / 2.0 * bbox.h};
        }
        frame.appearance.resize(ids[static_cast<size_t>(i)].appearance_centroid.size());
        for (size_t c = 0; c < frame.appearance.size(); ++c)
          frame.appearance[c] = ids[static_cast<size_t>(i)].appearance_centroid[c] + 0.1 * gauss(rng);
        track.frames.push_back(std::move(frame));
      }
      tracks.push_back(std::move(track));
    }
  }
  return tracks;
}

double average_precision(const std::vector<int>& relevance) {
  int relevant = 0;
  double sum = 0.0;
  for (size_t pos = 0; pos < relevance.size(); ++pos) {
    if (relevance[pos]) {
      ++relevant;
      sum += static_cast<double>(relevant) / static_cast<double>(pos + 1);
    }
  }
  if (relevant == 0) throw ArgumentError("average_precision: no relevant item in ranking");
  return sum / relevant;
}

CmcCurve cmc(const std::vector<int>& first_hit_positions) {
  if (first_hit_positions.empty()) throw ArgumentError("cmc: no queries");
  CmcCurve curve;
  for (int pos : first_hit_positions) {
    if (pos <= 0) continue;
    if (pos <= 1) curve.rank1 += 1.0;
    if (pos <= 5) curve.rank5 += 1.0;
    if (pos <= 20) curve.rank20 += 1.0;
  }
  const double n = static_cast<double>(first_hit_positions.size());
  curve.rank1 /= n;
  curve.rank5 /= n;
  curve.rank20 /= n;
  return curve;
}

std::vector<QueryRanking> retrieve(const RetrievalSet& set) {
  const int gallery = set.gallery_feats.rows();
  const int queries = set.query_feats.rows();
  if (gallery == 0) throw ArgumentError("retrieve: empty gallery");
  if (set.query_feats.cols() != set.gallery_feats.cols())
    throw DimensionError("retrieve: query dim " + shape_str(set.query_feats) + " vs gallery " +
                         shape_str(set.gallery_feats));

  std::vector<QueryRanking> rankings(static_cast<size_t>(queries));
  std::vector<std::pair<double, int>> order;
  for (int q = 0; q < queries; ++q) {
    order.clear();
    for (int g = 0; g < gallery; ++g) {
      if (set.gallery_labels[static_cast<size_t>(g)] == set.query_labels[static_cast<size_t>(q)] &&
          set.gallery_cams[static_cast<size_t>(g)] == set.query_cams[static_cast<size_t>(q)])
        continue;
      double d2 = 0.0;
      for (int c = 0; c < set.query_feats.cols(); ++c) {
        const double diff = set.query_feats(q, c) - set.gallery_feats(g, c);
        d2 += diff * diff;
      }
      order.emplace_back(d2, g);
    }
    std::sort(order.begin(), order.end());
    auto& r = rankings[static_cast<size_t>(q)];
    r.gallery_indices.reserve(order.size());
    r.relevance.reserve(order.size());
    for (const auto& [d2, g] : order) {
      r.gallery_indices.push_back(g);
      r.relevance.push_back(
          set.gallery_labels[static_cast<size_t>(g)] == set.query_labels[static_cast<size_t>(q)] ? 1 : 0);
    }
  }
  return rankings;
}

RetrievalMetrics evaluate_retrieval(const RetrievalSet& set) {
  std::vector<QueryRanking> rankings = retrieve(set);
  RetrievalMetrics metrics;
  std::vector<int> hits;
  double ap_sum = 0.0;
  int counted = 0;
  for (const auto& r : rankings) {
    const bool any = std::find(r.relevance.begin(), r.relevance.end(), 1) != r.relevance.end();
    if (!any) {
      ++metrics.skipped_queries;
      continue;
    }
    ap_sum += average_precision(r.relevance);
    ++counted;
    int first = 0;
    for (size_t pos = 0; pos < r.relevance.size(); ++pos)
      if (r.relevance[pos]) {
        first = static_cast<int>(pos + 1);
        break;
      }
    hits.push_back(first);
  }
  if (counted == 0) throw ArgumentError("evaluate_retrieval: no query has a relevant gallery item");
  metrics.map = ap_sum / counted;
  metrics.curve = cmc(hits);
  return metrics;
}

}  // namespace posergcn
