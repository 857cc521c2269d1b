#include "posergcn/appearance.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "posergcn/cells.hpp"

namespace posergcn {

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::ap: return "ap";
    case Aggregator::aa: return "aa";
    case Aggregator::ra: return "ra";
  }
  return "?";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "ap") return Aggregator::ap;
  if (s == "aa") return Aggregator::aa;
  if (s == "ra") return Aggregator::ra;
  throw ArgumentError("unknown aggregator: " + s);
}

AaParams AaParams::init(int d, std::mt19937_64& rng) {
  AaParams p;
  p.d = d;
  p.score = Param(init_uniform(d, 1, d, rng));
  return p;
}

RaParams RaParams::init(int d, std::mt19937_64& rng) {
  RaParams p;
  p.d = d;
  for (int k = 0; k < 4; ++k) {
    p.w[static_cast<size_t>(k)] = Param(init_uniform(d, d, d, rng));
    p.u[static_cast<size_t>(k)] = Param(init_uniform(d, d, d, rng));
    p.b[static_cast<size_t>(k)] = Param(init_uniform(1, d, d, rng));
  }
  return p;
}

Var ap(Var frames) { return rows_mean(frames); }

Var aa(Var frames, AaParams& p) {
  Tape& tape = *frames.tape;
  Var scores = matmul(frames, tape.leaf(p.score));  // T x 1
  Var weights = softmax_col(scores);
  return matmul(transpose(weights), frames);        // 1 x d
}

Var ra(Var frames, RaParams& p) {
  Tape& tape = *frames.tape;
  const int d = frames.cols();
  if (d != p.d)
    throw DimensionError("ra: frames are " + shape_str(frames.value()) + " but params expect d=" +
                         std::to_string(p.d));
  std::array<Var, 4> w;
  std::array<Var, 4> u;
  std::array<Var, 4> b;
  for (int k = 0; k < 4; ++k) {
    w[static_cast<size_t>(k)] = tape.leaf(p.w[static_cast<size_t>(k)]);
    u[static_cast<size_t>(k)] = tape.leaf(p.u[static_cast<size_t>(k)]);
    b[static_cast<size_t>(k)] = tape.leaf(p.b[static_cast<size_t>(k)]);
  }
  Var h = tape.constant(Matrix(1, d));
  Var c = tape.constant(Matrix(1, d));
  Var acc = tape.constant(Matrix(1, d));
  for (int t = 0; t < frames.rows(); ++t) {
    Var x = row(frames, t);
    auto pre = [&](int k) {
      return add(add(matmul(x, w[static_cast<size_t>(k)]), matmul(h, u[static_cast<size_t>(k)])),
                 b[static_cast<size_t>(k)]);
    };
    Var f = sigmoid(pre(0));
    Var i = sigmoid(pre(1));
    Var o = sigmoid(pre(2));
    Var g = tanh(pre(3));
    c = add(hadamard(f, c), hadamard(i, g));
    h = hadamard(o, tanh(c));
    acc = add(acc, h);
  }
  return scale(acc, 1.0 / frames.rows());
}

namespace {

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw ArgumentError("apft: truncated header");
  return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
         static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
}

}  // namespace

void write_apft(const std::filesystem::path& path, const Matrix& feats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write appearance file: " + path.string());
  out.write("APFT", 4);
  write_u32(out, 1);
  write_u32(out, static_cast<uint32_t>(feats.cols()));
  write_u32(out, static_cast<uint32_t>(feats.rows()));
  for (int i = 0; i < feats.size(); ++i) {
    const float f = static_cast<float>(feats[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
  }
}

Matrix read_apft(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open appearance file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "APFT")
    throw ArgumentError("apft: bad magic in " + path.string());
  const uint32_t version = read_u32(in);
  if (version != 1) throw ArgumentError("apft: unsupported version " + std::to_string(version));
  const uint32_t d = read_u32(in);
  const uint32_t t = read_u32(in);
  if (d == 0 || t == 0) throw ArgumentError("apft: empty feature block in " + path.string());
  Matrix feats(static_cast<int>(t), static_cast<int>(d));
  for (int i = 0; i < feats.size(); ++i) {
    const uint32_t bits = read_u32(in);
    float f;
    std::memcpy(&f, &bits, 4);
    feats[i] = static_cast<double>(f);
  }
  return feats;
}

}  // namespace posergcn
