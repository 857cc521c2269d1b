#include "posergcn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace posergcn {

namespace {

constexpr char kMagic[4] = {'P', 'G', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw ArgumentError(std::string("checkpoint: truncated while reading ") + what);
  return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
         static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
}

double read_f64(std::istream& in, const char* what) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw ArgumentError(std::string("checkpoint: truncated while reading ") + what);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [key, m] : entries)
    if (key == name) return &m;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                     const std::vector<std::pair<std::string, const Param*>>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(config_text.size()));
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(p->value.rows()));
    write_u32(out, static_cast<uint32_t>(p->value.cols()));
    for (int i = 0; i < p->value.size(); ++i) write_f64(out, p->value[i]);
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ArgumentError("checkpoint: bad magic in " + path.string());
  const uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw ArgumentError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const uint32_t cfg_len = read_u32(in, "config length");
  ck.config_text.resize(cfg_len);
  in.read(ck.config_text.data(), cfg_len);
  if (!in) throw ArgumentError("checkpoint: truncated config text");

  const uint32_t count = read_u32(in, "entry count");
  ck.entries.reserve(count);
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_u32(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ArgumentError("checkpoint: truncated entry name");
    const uint32_t rows = read_u32(in, "rows");
    const uint32_t cols = read_u32(in, "cols");
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    for (int i = 0; i < m.size(); ++i) m[i] = read_f64(in, name.c_str());
    ck.entries.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

}  // namespace posergcn
