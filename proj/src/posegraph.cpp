#include "posergcn/posegraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace posergcn {

namespace {

// 1-based endpoint pairs of the skeleton tree.
constexpr int kEdges[13][2] = {{1, 2},  {2, 3},   {2, 6},   {3, 4},  {6, 7},  {4, 5},  {7, 8},
                               {2, 9},  {2, 12},  {9, 10},  {12, 13}, {10, 11}, {13, 14}};

}  // namespace

AdjacencyMatrix canonical_adjacency() {
  Matrix a(kKeypoints, kKeypoints);
  for (const auto& e : kEdges) {
    a(e[0] - 1, e[1] - 1) = 1.0;
    a(e[1] - 1, e[0] - 1) = 1.0;
  }
  return AdjacencyMatrix{a, normalize_adjacency(a)};
}

Matrix normalize_adjacency(const Matrix& a) {
  if (a.rows() != a.cols())
    throw ArgumentError("normalize_adjacency: matrix must be square, got " + shape_str(a));
  const int n = a.rows();
  for (int i = 0; i < n; ++i) {
    if (a(i, i) != 0.0) throw ArgumentError("normalize_adjacency: nonzero diagonal at node " +
                                            std::to_string(i));
    for (int j = 0; j < n; ++j) {
      if (a(i, j) != a(j, i))
        throw ArgumentError("normalize_adjacency: asymmetric at (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
      if (a(i, j) != 0.0 && a(i, j) != 1.0)
        throw ArgumentError("normalize_adjacency: non-binary entry at (" + std::to_string(i) +
                            ", " + std::to_string(j) + ")");
    }
  }

  std::vector<double> inv_sqrt_deg(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop from A + I
    for (int j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }

  Matrix a_hat(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double tilde = a(i, j) + (i == j ? 1.0 : 0.0);
      if (tilde != 0.0)
        a_hat(i, j) = inv_sqrt_deg[static_cast<size_t>(i)] * tilde * inv_sqrt_deg[static_cast<size_t>(j)];
    }
  }
  return a_hat;
}

PoseFrame frame_from_detection(const std::array<std::optional<DetectedKeypoint>, kKeypoints>& kps,
                               const BoundingBox& bbox, int* clamp_warnings) {
  if (bbox.w <= 0.0 || bbox.h <= 0.0)
    throw ArgumentError("frame_from_detection: bbox must have positive extent");

  PoseFrame frame;
  for (int i = 0; i < kKeypoints; ++i) {
    const auto& kp = kps[static_cast<size_t>(i)];
    if (!kp) continue;
    double nx = 2.0 * (kp->x - bbox.x) / bbox.w - 1.0;
    double ny = 2.0 * (kp->y - bbox.y) / bbox.h - 1.0;
    if (nx < -1.0 || nx > 1.0 || ny < -1.0 || ny > 1.0) {
      if (clamp_warnings) ++*clamp_warnings;
      nx = std::clamp(nx, -1.0, 1.0);
      ny = std::clamp(ny, -1.0, 1.0);
    }
    frame.coords(i, 0) = nx;
    frame.coords(i, 1) = ny;
    frame.visible[static_cast<size_t>(i)] = true;
  }
  return frame;
}

TemporalPoseGraph build_temporal_graph(std::vector<PoseFrame> frames) {
  if (frames.empty()) throw ArgumentError("build_temporal_graph: empty frame list");
  return TemporalPoseGraph{std::move(frames), canonical_adjacency()};
}

std::string track_to_json_line(const TrackRecord& track) {
  nlohmann::json j;
  j["track"] = track.track_id;
  j["identity"] = track.identity;
  j["camera"] = track.camera;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : track.frames) {
    nlohmann::json jf;
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& kp : f.keypoints) {
      if (kp)
        kps.push_back(nlohmann::json::array({kp->x, kp->y}));
      else
        kps.push_back(nullptr);
    }
    jf["keypoints"] = std::move(kps);
    jf["bbox"] = nlohmann::json::array({f.bbox.x, f.bbox.y, f.bbox.w, f.bbox.h});
    if (!f.appearance.empty()) jf["appearance"] = f.appearance;
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  return j.dump();
}

TrackRecord track_from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  TrackRecord track;
  track.track_id = j.at("track").get<std::string>();
  track.identity = j.at("identity").get<int>();
  track.camera = j.at("camera").get<int>();
  for (const auto& jf : j.at("frames")) {
    FrameRecord f;
    const auto& kps = jf.at("keypoints");
    if (kps.size() != kKeypoints)
      throw ArgumentError("track " + track.track_id + ": expected " + std::to_string(kKeypoints) +
                          " keypoints, got " + std::to_string(kps.size()));
    for (size_t i = 0; i < kps.size(); ++i) {
      if (kps[i].is_null()) continue;
      f.keypoints[i] = DetectedKeypoint{kps[i][0].get<double>(), kps[i][1].get<double>()};
    }
    const auto& bb = jf.at("bbox");
    f.bbox = BoundingBox{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                         bb[3].get<double>()};
    if (jf.contains("appearance")) f.appearance = jf["appearance"].get<std::vector<double>>();
    track.frames.push_back(std::move(f));
  }
  return track;
}

std::vector<TrackRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open dataset: " + path.string());
  std::vector<TrackRecord> tracks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    tracks.push_back(track_from_json_line(line));
  }
  return tracks;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<TrackRecord>& tracks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write dataset: " + path.string());
  for (const auto& t : tracks) out << track_to_json_line(t) << '\n';
}

}  // namespace posergcn
