#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitgrade/model.hpp"

namespace traitgrade {

// Trains (or just evaluates) `model` on one fold and returns its overall test QWK.
using FoldTrainer = std::function<double(Model& model, int fold)>;

struct AblationResult {
  std::string trait;
  std::vector<int> folds;
  std::vector<double> base_qwk;
  std::vector<double> ablated_qwk;
  // Mean base test QWK minus mean ablated test QWK: the drop in performance.
  double delta = 0;
  std::size_t base_params = 0;
  std::size_t ablated_params = 0;
};

// Initial (untrained) base model of a fold.
using BaseFactory = std::function<Model(int fold)>;

// Runs the base MTL model and the model without `trait` through `trainer` on every
// fold. Both start from the fold's base model; the ablated model shares its
// initial values for every tensor it keeps. When `base_qwk` is given the base
// model is not rerun. Parameter counts are those of the first fold.
AblationResult ablate(const BaseFactory& base_initial, std::string_view trait, std::span<const int> folds,
                      const FoldTrainer& trainer, std::optional<std::vector<double>> base_qwk = std::nullopt);
AblationResult ablate(const Model& base_initial, std::string_view trait, std::span<const int> folds,
                      const FoldTrainer& trainer, std::optional<std::vector<double>> base_qwk = std::nullopt);

// Published drop in holistic QWK when a trait is removed, for comparison.
std::optional<double> reference_drop(int prompt_id, std::string_view trait);

}  // namespace traitgrade
