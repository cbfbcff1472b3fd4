#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ffevss/nn/params.hpp"

namespace ffevss::nn {

/// Versioned binary container of named parameter stores. Each store keeps
/// shapes, values, Adam moments and step count, and its RNG state, so a
/// round trip reproduces the stores exactly. `metadata` is free-form JSON.
struct Checkpoint {
  static constexpr char kMagic[8] = {'F', 'F', 'E', 'V', 'S', 'S', 'C', 'K'};
  static constexpr std::uint32_t kVersion = 1;

  std::string metadata = "{}";
  std::vector<std::pair<std::string, ParamStore>> stores;

  const ParamStore& store(const std::string& name) const;
};

/// Writes through a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws ParseError on a wrong magic, unknown version or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ffevss::nn
