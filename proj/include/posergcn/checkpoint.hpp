#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "posergcn/tape.hpp"

namespace posergcn {

/// Self-describing parameter snapshot: the config text plus every tensor
/// keyed by module/name with a shape header. No serialization framework,
/// no version skew.
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Matrix>> entries;

  const Matrix* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                     const std::vector<std::pair<std::string, const Param*>>& params);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace posergcn
