#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "traitgrade/tensor.hpp"

namespace traitgrade {

class Vocabulary;

// Pre-trained vectors keyed by token, as read from a GloVe text file
// ("token v1 v2 ... vd" per line).
struct GloveTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<Real>> vectors;
};

// Reads the file, keeping only tokens of `keep` when given. Throws ConfigError when
// `expected_dim` is non-zero and the file's dimension differs, or lines disagree.
GloveTable read_glove(const std::filesystem::path& path, std::size_t expected_dim = 0,
                      const Vocabulary* keep = nullptr);

}  // namespace traitgrade
