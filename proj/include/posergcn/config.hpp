#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "posergcn/appearance.hpp"
#include "posergcn/attention.hpp"
#include "posergcn/cells.hpp"
#include "posergcn/training.hpp"

namespace posergcn {

/// Run configuration, parsed from a `key = value` text file. Unknown keys
/// are rejected by name. POSERGCN_SEED in the environment overrides seed.
struct RunConfig {
  uint64_t seed = 42;
  int n = 16;
  int d = 64;
  int layers = 1;
  CellKind cell = CellKind::rgcn;
  Pooling pooling = Pooling::dam;
  Aggregator aggregator = Aggregator::ap;
  double margin = 0.3;
  LambdaMode lambda_mode;
  int epochs = 400;
  int P = 8;
  int K = 4;
  int T = 10;
  double lr = 3e-4;

  static RunConfig parse(std::istream& in);
  static RunConfig parse_file(const std::filesystem::path& path);
  static RunConfig parse_text(const std::string& text);

  /// Canonical text form (fixed key order); equal configs serialize
  /// identically, which keeps config_hash stable across reruns.
  std::string canonical() const;

  /// FNV-1a 64 over the canonical text, as hex.
  std::string hash() const;

  void apply_env_seed_override();
  void validate() const;
};

std::string to_string(const LambdaMode& mode);
LambdaMode lambda_mode_from_string(const std::string& s);

}  // namespace posergcn
