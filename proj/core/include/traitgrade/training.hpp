#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traitgrade/model.hpp"

namespace traitgrade {

enum class OptimizerKind {
  rmsprop,
  // RMSProp plus a classical velocity term driven by `momentum`.
  rmsprop_momentum,
};
enum class SelectionMetric { qwk, mse };

std::string_view to_string(OptimizerKind k);
std::string_view to_string(SelectionMetric m);
OptimizerKind parse_optimizer(std::string_view s);
SelectionMetric parse_selection(std::string_view s);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  // Decay of the squared-gradient average.
  double rms_decay = 0.9;
  double epsilon = 1e-7;
  OptimizerKind optimizer = OptimizerKind::rmsprop;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  SelectionMetric selection = SelectionMetric::qwk;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct OptimizerState {
  std::vector<std::vector<Real>> mean_square;
  std::vector<std::vector<Real>> velocity;
};

// s <- rho*s + (1-rho)*g^2;  p <- p - lr*g/sqrt(s+eps)  (velocity form when
// momentum is enabled). Grads are read from each tensor's grad slot.
void rmsprop_step(std::span<Tensor* const> params, OptimizerState& state, const TrainConfig& config);

// One essay with normalised targets and raw gold scores for every model head.
struct Example {
  std::int64_t essay_id = 0;
  EncodedEssay essay;
  std::vector<Real> targets;
  std::vector<int> scores;
};

std::vector<Example> make_examples(std::span<const EssayRecord> records, const Vocabulary& vocab,
                                   const ModelConfig& config);

struct Batch {
  std::vector<std::size_t> indices;
  PaddedBatch padded;
};

// Shuffled partition of [0, n) into consecutive batches; the last may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng);
std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size, Rng& rng);

// Eval-mode predictions, one normalised vector per head.
std::vector<std::vector<Real>> predict(Model& model, std::span<const Example> examples,
                                       std::size_t batch_size = 100);

struct HeadEvaluation {
  std::vector<double> qwk;  // per head
  std::vector<double> mse;  // per head, normalised scale
  std::vector<std::vector<int>> predictions;  // per head, integer scores
};

HeadEvaluation evaluate(Model& model, std::span<const Example> examples, std::size_t batch_size = 100);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  std::vector<double> dev_qwk;
  std::vector<double> dev_mse;
  double seconds = 0;
};

struct TrainHooks {
  // Replaces the selection score of an epoch (higher is better) when set.
  std::function<double(const EpochRecord&)> selection_score;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  int best_epoch = 0;
  double best_score = 0;
  std::vector<EpochRecord> history;
  double seconds = 0;
};

// Trains for config.epochs epochs and leaves the model holding the parameters of
// the epoch with the best dev score (the first such epoch on ties). Throws
// NonFiniteLossError if a batch loss is NaN or infinite.
TrainResult train(Model& model, std::span<const Example> train_set, std::span<const Example> dev_set,
                  const TrainConfig& config, const TrainHooks& hooks = {});

struct TimingRecord {
  int prompt = 0;
  std::string config;  // e.g. "stl-lstm", "stl-lstm.content", "mtl-bilstm"
  int fold = 0;
  double seconds = 0;
};

struct RuntimeReport {
  std::map<std::string, double> seconds_by_config;
  std::map<std::string, double> stl_seconds;  // by recurrent kind
  std::map<std::string, double> mtl_seconds;
  std::map<std::string, double> speedup;
};

// STL time is every single-task run (overall and per trait) of a recurrent kind;
// the speed-up is that total over the matching MTL total.
RuntimeReport measure_runtime(std::span<const TimingRecord> records);
double speedup_ratio(std::span<const double> stl_seconds, double mtl_seconds);

}  // namespace traitgrade
