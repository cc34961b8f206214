#include "traitgrade/ablation.hpp"

#include <array>
#include <map>
#include <utility>

#include "traitgrade/errors.hpp"
#include "traitgrade/metrics.hpp"

namespace traitgrade {

AblationResult ablate(const BaseFactory& base_initial, std::string_view trait, std::span<const int> folds,
                      const FoldTrainer& trainer, std::optional<std::vector<double>> base_qwk) {
  if (folds.empty()) throw ArgumentError("ablation needs at least one fold");
  if (base_qwk && base_qwk->size() != folds.size())
    throw ArgumentError("ablation: " + std::to_string(base_qwk->size()) + " base scores for " +
                        std::to_string(folds.size()) + " folds");

  AblationResult r;
  r.trait = std::string(trait);
  r.folds.assign(folds.begin(), folds.end());
  for (std::size_t i = 0; i < folds.size(); ++i) {
    Model base = base_initial(folds[i]);
    if (!base.config().prompt().has_trait(trait))
      throw ConfigError("prompt " + std::to_string(base.config().prompt_id) + " has no trait '" +
                        std::string(trait) + "'");
    Model ablated = ablate_model(base, trait);
    if (i == 0) {
      r.base_params = base.count_params().total;
      r.ablated_params = ablated.count_params().total;
    }
    r.base_qwk.push_back(base_qwk ? (*base_qwk)[i] : trainer(base, folds[i]));
    r.ablated_qwk.push_back(trainer(ablated, folds[i]));
  }
  r.delta = mean(r.base_qwk) - mean(r.ablated_qwk);
  return r;
}

AblationResult ablate(const Model& base_initial, std::string_view trait, std::span<const int> folds,
                      const FoldTrainer& trainer, std::optional<std::vector<double>> base_qwk) {
  return ablate([&base_initial](int) { return base_initial; }, trait, folds, trainer, std::move(base_qwk));
}

std::optional<double> reference_drop(int prompt_id, std::string_view trait) {
  using Row = std::array<double, 8>;
  constexpr double n = -1;
  static const std::map<std::string, Row, std::less<>> table{
      {"content", {0.0148, 0.0092, 0.0064, 0.0074, 0.0030, 0.0128, 0.0102, 0.0102}},
      {"organization", {0.0122, 0.0088, n, n, n, n, 0.0090, 0.0052}},
      {"word choice", {0.0080, 0.0164, n, n, n, n, n, 0.0264}},
      {"sentence fluency", {0.0086, 0.0036, n, n, n, n, n, 0.0196}},
      {"conventions", {0.0090, 0.0018, n, n, n, n, 0.0076, 0.0056}},
      {"prompt adherence", {n, n, 0.0282, 0.0112, 0.0026, 0.0044, n, n}},
      {"language", {n, n, 0.0080, 0.0108, 0.0088, 0.0030, n, n}},
      {"narrativity", {n, n, 0.0092, 0.0050, 0.0124, 0.0062, n, n}},
      {"style", {n, n, n, n, n, n, 0.0030, n}},
      {"voice", {n, n, n, n, n, n, n, 0.0094}},
  };
  if (prompt_id < 1 || prompt_id > 8) return std::nullopt;
  auto it = table.find(trait);
  if (it == table.end()) return std::nullopt;
  const double v = it->second[static_cast<std::size_t>(prompt_id - 1)];
  if (v < 0) return std::nullopt;
  return v;
}

}  // namespace traitgrade
