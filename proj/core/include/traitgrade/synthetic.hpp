#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "traitgrade/dataset.hpp"

namespace traitgrade {

// Generated essays in the ASAP formats whose scores are learnable from the text:
// each trait's score sets how often its marker words appear, and longer essays
// tend to score higher.
struct SyntheticOptions {
  std::vector<int> prompts{1};
  std::size_t essays_per_prompt = 100;
  std::uint64_t seed = 7;
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 8;
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 12;
};

std::vector<EssayRecord> make_synthetic_records(const SyntheticOptions& options);

struct SyntheticFiles {
  std::filesystem::path asap_tsv;
  std::filesystem::path trait_dir;
};

// Writes <dir>/training_set_rel3.tsv and <dir>/traits/prompt<N>.csv.
SyntheticFiles write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options);

}  // namespace traitgrade
