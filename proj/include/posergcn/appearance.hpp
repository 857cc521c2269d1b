#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>

#include "posergcn/tape.hpp"

namespace posergcn {

enum class Aggregator { ap, aa, ra };

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);

/// Per-frame appearance features for one track, one row per frame.
struct AppearanceSequence {
  Matrix feats;  // T x d

  int length() const { return feats.rows(); }
  int dim() const { return feats.cols(); }
};

/// Attention aggregation: a single learned score vector, frame weights by
/// softmax over the per-frame scores.
struct AaParams {
  int d = 0;
  Param score;  // d x 1

  static AaParams init(int d, std::mt19937_64& rng);
  template <class F>
  void visit(F&& f) {
    f("score", score);
  }
};

/// Recurrent aggregation: a standard LSTM over the frame features, output
/// dimension equal to the input dimension.
struct RaParams {
  int d = 0;
  std::array<Param, 4> w;  // gate order f, i, o, g; each d x d
  std::array<Param, 4> u;  // each d x d
  std::array<Param, 4> b;  // each 1 x d

  static RaParams init(int d, std::mt19937_64& rng);
  template <class F>
  void visit(F&& f) {
    static constexpr const char* kGate[] = {"f", "i", "o", "g"};
    for (int k = 0; k < 4; ++k) {
      f(std::string("w_") + kGate[k], w[static_cast<size_t>(k)]);
      f(std::string("u_") + kGate[k], u[static_cast<size_t>(k)]);
      f(std::string("b_") + kGate[k], b[static_cast<size_t>(k)]);
    }
  }
};

/// Average pooling over frames. `frames` is a T x d constant on the tape.
Var ap(Var frames);

/// Softmax-weighted average with learned frame scores.
Var aa(Var frames, AaParams& p);

/// Mean of the LSTM outputs over the frames, zero initial state.
Var ra(Var frames, RaParams& p);

/// Binary per-track appearance file: header {magic "APFT", version u32,
/// d u32, T u32} followed by T*d little-endian 32-bit floats.
void write_apft(const std::filesystem::path& path, const Matrix& feats);
Matrix read_apft(const std::filesystem::path& path);

}  // namespace posergcn
