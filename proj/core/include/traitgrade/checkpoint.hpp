#pragma once

#include <filesystem>
#include <iosfwd>

#include "traitgrade/model.hpp"
#include "traitgrade/text.hpp"

namespace traitgrade {

struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

// Binary container: magic, format version, sizeof(Real), model config (JSON),
// vocabulary, then every parameter by name with its shape and raw values.
void write_checkpoint(std::ostream& out, Model& model, const Vocabulary& vocab);
void save_checkpoint(const std::filesystem::path& path, Model& model, const Vocabulary& vocab);

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace traitgrade
