#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "posergcn/matrix.hpp"

namespace posergcn {

inline constexpr int kKeypoints = 14;

/// One detected pose: normalized 2-D keypoint coordinates plus visibility.
/// Invisible keypoints sit exactly at (0, 0) so they contribute a zero row
/// to the initial node features; visible coordinates lie in [-1, 1]^2.
struct PoseFrame {
  Matrix coords{kKeypoints, 2};
  std::array<bool, kKeypoints> visible{};
};

/// The skeleton adjacency: raw binary matrix plus its symmetric
/// normalization with self-loops, a_hat = D^{-1/2} (A + I) D^{-1/2}.
struct AdjacencyMatrix {
  Matrix a;
  Matrix a_hat;
};

/// A sequence of pose frames over one shared, time-constant adjacency.
struct TemporalPoseGraph {
  std::vector<PoseFrame> frames;
  AdjacencyMatrix adjacency;

  int length() const { return static_cast<int>(frames.size()); }
};

/// The fixed 14-node skeleton: a connected 13-edge tree. Node numbering
/// (1-based): 1 head, 2 neck, 3/6 shoulders, 4/7 elbows, 5/8 wrists,
/// 9/12 hips, 10/13 knees, 11/14 ankles. Edges: 1-2, 2-3, 2-6, 3-4, 6-7,
/// 4-5, 7-8, 2-9, 2-12, 9-10, 12-13, 10-11, 13-14.
AdjacencyMatrix canonical_adjacency();

/// Symmetric normalization with self-loops. Requires a symmetric binary
/// matrix with zero diagonal.
Matrix normalize_adjacency(const Matrix& a);

struct DetectedKeypoint {
  double x = 0.0;
  double y = 0.0;
};

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// Maps detected keypoints from bbox pixel coordinates into the
/// bbox-centered [-1, 1]^2 frame; missing keypoints become (0, 0) and
/// invisible. Out-of-bbox keypoints are clamped and counted in
/// `clamp_warnings` rather than rejected (detector noise is expected).
PoseFrame frame_from_detection(const std::array<std::optional<DetectedKeypoint>, kKeypoints>& kps,
                               const BoundingBox& bbox, int* clamp_warnings = nullptr);

/// Wraps ordered frames with the canonical adjacency.
TemporalPoseGraph build_temporal_graph(std::vector<PoseFrame> frames);

/// One line of the JSONL pose format: raw detections for a whole track,
/// with optional per-frame appearance vectors.
struct FrameRecord {
  std::array<std::optional<DetectedKeypoint>, kKeypoints> keypoints;
  BoundingBox bbox;
  std::vector<double> appearance;  // empty when not embedded
};

struct TrackRecord {
  std::string track_id;
  int identity = 0;
  int camera = 0;
  std::vector<FrameRecord> frames;
};

std::string track_to_json_line(const TrackRecord& track);
TrackRecord track_from_json_line(const std::string& line);

std::vector<TrackRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<TrackRecord>& tracks);

}  // namespace posergcn
