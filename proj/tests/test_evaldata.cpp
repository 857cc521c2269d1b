#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "posergcn/evaldata.hpp"

using namespace posergcn;

namespace {

std::string dump_jsonl(const std::vector<TrackRecord>& tracks) {
  std::ostringstream out;
  for (const auto& t : tracks) out << track_to_json_line(t) << '\n';
  return out.str();
}

}  // namespace

TEST_CASE("synth_tracks honors occlusion, ambiguity, and determinism") {
  SynthSpec spec;
  spec.n_ids = 4;
  spec.tracks_per_id = 3;
  spec.frames = 6;
  spec.seed = 99;

  {
    SynthSpec clean = spec;
    clean.occlusion_rate = 0.0;
    auto tracks = synth_tracks(clean);
    CHECK(tracks.size() == 12);
    for (const auto& t : tracks) {
      CHECK(t.frames.size() == 6);
      for (const auto& f : t.frames)
        for (const auto& kp : f.keypoints) CHECK(kp.has_value());
    }
  }
  {
    SynthSpec shared = spec;
    shared.appearance_ambiguity = 1.0;
    auto tracks = synth_tracks(shared);
    // All identity centroids collapse; per-frame features still carry noise,
    // so compare the centroids via per-track means across many frames.
    SynthSpec shared_many = shared;
    shared_many.frames = 200;
    auto long_tracks = synth_tracks(shared_many);
    std::vector<std::vector<double>> means;
    for (int id = 0; id < 4; ++id) {
      const auto& t = long_tracks[static_cast<size_t>(id * 3)];
      std::vector<double> mean(t.frames[0].appearance.size(), 0.0);
      for (const auto& f : t.frames)
        for (size_t c = 0; c < mean.size(); ++c) mean[c] += f.appearance[c] / t.frames.size();
      means.push_back(mean);
    }
    for (size_t a = 0; a < means.size(); ++a)
      for (size_t b = a + 1; b < means.size(); ++b) {
        double d = 0.0;
        for (size_t c = 0; c < means[a].size(); ++c)
          d += (means[a][c] - means[b][c]) * (means[a][c] - means[b][c]);
        CHECK(std::sqrt(d) < 0.2);  // noise-level only: centroids are equal
      }
  }
  {
    auto a = synth_tracks(spec);
    auto b = synth_tracks(spec);
    CHECK(dump_jsonl(a) == dump_jsonl(b));

    SynthSpec other = spec;
    other.seed = 100;
    auto c = synth_tracks(other);
    CHECK(dump_jsonl(a) != dump_jsonl(c));
  }
  {
    SynthSpec bad = spec;
    bad.occlusion_rate = 1.0;
    CHECK_THROWS_AS(synth_tracks(bad), ArgumentError);
    bad = spec;
    bad.appearance_ambiguity = 1.5;
    CHECK_THROWS_AS(synth_tracks(bad), ArgumentError);
    bad = spec;
    bad.n_ids = 1;
    CHECK_THROWS_AS(synth_tracks(bad), ArgumentError);
  }
}

TEST_CASE("synthetic identities differ in geometry") {
  SynthSpec spec;
  spec.n_ids = 6;
  spec.tracks_per_id = 2;
  spec.frames = 8;
  spec.occlusion_rate = 0.0;
  auto tracks = synth_tracks(spec);
  // Distinct identities should place keypoints differently on average.
  std::set<long> signatures;
  for (int id = 0; id < 6; ++id) {
    const auto& t = tracks[static_cast<size_t>(id * 2)];
    double sum = 0.0;
    for (const auto& f : t.frames)
      for (const auto& kp : f.keypoints) sum += kp->x + kp->y;
    signatures.insert(std::lround(sum * 1000.0));
  }
  CHECK(signatures.size() == 6);
}

TEST_CASE("average precision hand cases") {
  CHECK(average_precision({1, 0, 1}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(average_precision({1, 1, 1}) == 1.0);
  CHECK(average_precision({0, 0, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(average_precision({0, 0, 0}), ArgumentError);
}

TEST_CASE("cmc hand cases") {
  {
    CmcCurve curve = cmc({1, 1, 1});
    CHECK(curve.rank1 == 1.0);
    CHECK(curve.rank5 == 1.0);
    CHECK(curve.rank20 == 1.0);
  }
  {
    CmcCurve curve = cmc({1, 6, 2});
    CHECK(curve.rank1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(curve.rank5 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(curve.rank20 == 1.0);
  }
  {
    CmcCurve curve = cmc({21});
    CHECK(curve.rank1 == 0.0);
    CHECK(curve.rank20 == 0.0);
  }
}

TEST_CASE("retrieve: clone under another camera is the rank-1 hit") {
  RetrievalSet set;
  set.query_feats = Matrix::from_rows({{1.0, 2.0}});
  set.query_labels = {3};
  set.query_cams = {0};
  set.gallery_feats = Matrix::from_rows({{5.0, 5.0}, {1.0, 2.0}});
  set.gallery_labels = {1, 3};
  set.gallery_cams = {0, 1};
  auto rankings = retrieve(set);
  REQUIRE(rankings.size() == 1);
  CHECK(rankings[0].gallery_indices[0] == 1);
  CHECK(rankings[0].relevance[0] == 1);

  RetrievalMetrics metrics = evaluate_retrieval(set);
  CHECK(metrics.curve.rank1 == 1.0);
  CHECK(metrics.map == 1.0);
}

TEST_CASE("retrieve: hand-set distances order the gallery; ties break by index") {
  RetrievalSet set;
  set.query_feats = Matrix::from_rows({{0.0, 0.0}});
  set.query_labels = {0};
  set.query_cams = {0};
  set.gallery_feats = Matrix::from_rows({{3.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {1.0, 0.0}});
  set.gallery_labels = {0, 1, 0, 1};
  set.gallery_cams = {1, 0, 1, 0};
  auto rankings = retrieve(set);
  REQUIRE(rankings.size() == 1);
  const auto& order = rankings[0].gallery_indices;
  CHECK(order == std::vector<int>{1, 3, 2, 0});  // distances 1, 1 (tie by index), 2, 3
  CHECK(rankings[0].relevance == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("retrieve excludes same-identity same-camera items and empty galleries fail") {
  RetrievalSet set;
  set.query_feats = Matrix::from_rows({{0.0}});
  set.query_labels = {0};
  set.query_cams = {0};
  set.gallery_feats = Matrix::from_rows({{0.0}, {1.0}, {0.5}});
  set.gallery_labels = {0, 0, 1};
  set.gallery_cams = {0, 1, 0};  // first item is the query itself
  auto rankings = retrieve(set);
  CHECK(rankings[0].gallery_indices.size() == 2);
  for (int g : rankings[0].gallery_indices) CHECK(g != 0);

  RetrievalSet empty;
  empty.query_feats = Matrix::from_rows({{0.0}});
  empty.query_labels = {0};
  empty.query_cams = {0};
  CHECK_THROWS_AS(retrieve(empty), ArgumentError);
}

TEST_CASE("queries with no relevant gallery item are skipped with a counter") {
  RetrievalSet set;
  set.query_feats = Matrix::from_rows({{0.0}, {1.0}});
  set.query_labels = {0, 9};  // identity 9 never appears in the gallery
  set.query_cams = {0, 0};
  set.gallery_feats = Matrix::from_rows({{0.1}, {0.9}});
  set.gallery_labels = {0, 1};
  set.gallery_cams = {1, 1};
  RetrievalMetrics metrics = evaluate_retrieval(set);
  CHECK(metrics.skipped_queries == 1);
  CHECK(metrics.curve.rank1 == 1.0);
}

TEST_CASE("ranking metrics are deterministic and scale-invariant") {
  std::mt19937_64 rng(229);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int n = 40;
  Matrix feats(n, 6);
  for (int i = 0; i < feats.size(); ++i) feats[i] = dist(rng);
  RetrievalSet set;
  set.query_feats = feats;
  set.gallery_feats = feats;
  for (int i = 0; i < n; ++i) {
    set.query_labels.push_back(i % 8);
    set.query_cams.push_back((i / 8) % 2);  // same-id tracks span both cameras
  }
  set.gallery_labels = set.query_labels;
  set.gallery_cams = set.query_cams;

  RetrievalMetrics a = evaluate_retrieval(set);
  RetrievalMetrics b = evaluate_retrieval(set);
  CHECK(a.map == b.map);
  CHECK(a.curve.rank1 == b.curve.rank1);

  RetrievalSet scaled = set;
  scaled.query_feats = scale(set.query_feats, 7.25);
  scaled.gallery_feats = scale(set.gallery_feats, 7.25);
  RetrievalMetrics c = evaluate_retrieval(scaled);
  CHECK(a.map == c.map);
  CHECK(a.curve.rank1 == c.curve.rank1);
  CHECK(a.curve.rank5 == c.curve.rank5);
  CHECK(a.curve.rank20 == c.curve.rank20);
}

TEST_CASE("random embeddings score near the random-ranking expectation") {
  std::mt19937_64 rng(233);
  std::normal_distribution<double> dist(0.0, 1.0);
  const int ids = 10;
  const int per_id = 20;  // 200 queries
  const int n = ids * per_id;
  Matrix feats(n, 8);
  for (int i = 0; i < feats.size(); ++i) feats[i] = dist(rng);

  RetrievalSet set;
  set.query_feats = feats;
  set.gallery_feats = feats;
  for (int i = 0; i < n; ++i) {
    set.query_labels.push_back(i / per_id);
    set.query_cams.push_back(i % 2);
  }
  set.gallery_labels = set.query_labels;
  set.gallery_cams = set.query_cams;

  RetrievalMetrics metrics = evaluate_retrieval(set);
  // Valid gallery per query: n - per_id/2 items, per_id/2 of them relevant.
  const double p = (per_id / 2.0) / (n - per_id / 2.0);
  CHECK(std::abs(metrics.map - p) <= 0.1);
}
