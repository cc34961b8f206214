#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "traitgrade/dataset.hpp"
#include "traitgrade/layers.hpp"
#include "traitgrade/text.hpp"

namespace traitgrade {

struct GloveTable;

enum class RecurrentKind { lstm, bilstm };
enum class TaskMode { stl, mtl };

std::string_view to_string(RecurrentKind k);
std::string_view to_string(TaskMode m);
RecurrentKind parse_recurrent(std::string_view s);
TaskMode parse_mode(std::string_view s);

// Layer sizes; defaults are the published network dimensions.
struct Hyperparams {
  std::size_t embed_dim = 50;
  std::size_t window = 5;
  std::size_t filters = 100;
  std::size_t hidden = 100;
  double dropout = 0.5;
  // Where dropout is applied: on sentence vectors entering the recurrent layer and
  // on the essay vector entering each dense head.
  bool dropout_sentences = true;
  bool dropout_essay = true;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct ModelConfig {
  RecurrentKind recurrent = RecurrentKind::lstm;
  TaskMode mode = TaskMode::stl;
  std::string stl_target = std::string(kOverall);
  int prompt_id = 1;
  Hyperparams hyper;
  std::size_t vocab_size = Vocabulary::kDefaultMaxWords + 2;
  std::uint64_t seed = 0;
  // Traits removed from an MTL model (stack and concatenation slot).
  std::vector<std::string> ablated_traits;

  const PromptSpec& prompt() const { return prompt_spec(prompt_id); }
  // Output heads in model order: STL has its single target; MTL has "overall"
  // followed by the (non-ablated) traits in prompt order.
  std::vector<std::string> head_names() const;
  std::size_t directions() const { return recurrent == RecurrentKind::bilstm ? 2 : 1; }
  // "stl-lstm", "mtl-bilstm", "stl-lstm.word_choice", "mtl-lstm-minus-content", ...
  std::string name() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(std::string_view json);

// Parameters of one essay grading stack.
struct StackParams {
  ConvParams conv;
  AttentionParams word_attention;
  LstmParams forward;
  std::optional<LstmParams> backward;
  AttentionParams sentence_attention;
  DenseParams head;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> breakdown;
  std::size_t total = 0;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& heads() const noexcept { return heads_; }
  std::size_t head_index(std::string_view head) const;

  Tensor& embedding() noexcept { return embedding_; }
  const Tensor& embedding() const noexcept { return embedding_; }
  // stacks()[k] produces heads()[k].
  std::vector<StackParams>& stacks() noexcept { return stacks_; }
  const std::vector<StackParams>& stacks() const noexcept { return stacks_; }
  StackParams& stack(std::string_view head) { return stacks_[head_index(head)]; }

  // Every trainable tensor with a stable hierarchical name, in a fixed order.
  std::vector<NamedTensor> named_parameters();
  std::vector<Tensor*> parameters();
  ParamCount count_params() const;

  // Copies pre-trained rows for in-vocabulary tokens. Returns the number copied.
  std::size_t load_pretrained(const GloveTable& glove, const Vocabulary& vocab);

 private:
  ModelConfig config_;
  std::vector<std::string> heads_;
  Tensor embedding_;
  std::vector<StackParams> stacks_;
};

// A mini-batch of essays padded to its longest essay (sentences) and longest
// sentence (tokens). Token (b, s, t) lives at index (b*S + s)*T + t.
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::vector<int> token_ids;
  std::vector<std::uint8_t> token_mask;
  std::vector<std::uint8_t> sentence_mask;
};

PaddedBatch pad_batch(std::span<const EncodedEssay* const> essays);

// One Var of shape B x 1 per head, in Model::heads() order.
struct HeadOutputs {
  std::vector<Var> heads;
};

// Padded, masked forward pass over a whole batch.
HeadOutputs forward_batch(Tape& tape, Model& model, const PaddedBatch& batch, Mode mode, Rng& rng);

// Forward pass over a single essay without any padding.
HeadOutputs forward_essay(Tape& tape, Model& model, const EncodedEssay& essay, Mode mode, Rng& rng);

// Normalised score of an STL model.
Real forward_stl(Model& model, const EncodedEssay& essay, Mode mode, Rng& rng);

struct MtlOutput {
  Real overall = 0;
  std::vector<Real> traits;
};
MtlOutput forward_mtl(Model& model, const EncodedEssay& essay, Mode mode, Rng& rng);

// Uniformly weighted mean of per-head squared errors.
Real mtl_loss(std::span<const Real> preds, std::span<const Real> golds);
// Graph version: mean over heads of each head's batch MSE.
Var mtl_loss(std::span<const Var> preds, std::span<const Var> golds);

enum class Rounding { half_away_from_zero, floor, ceil };

// Linear aggregation of trait scores into a holistic score:
// intercept + sum_k coefficient_k * trait_k, then rounded and clamped.
struct Aggregation {
  std::map<std::string, double> coefficients;
  double intercept = 0;
  Rounding rounding = Rounding::half_away_from_zero;

  // Parses "content:1, organization:1, +0.5" style specifications; bare numbers
  // set the intercept. A trailing "round=floor" selects the rounding rule.
  static Aggregation parse(std::string_view spec);
};

int pipeline_holistic(const std::map<std::string, int>& trait_preds, const Aggregation& aggregation,
                      ScoreRange overall_range);

// Derives an MTL model without `trait`: its stack and its overall-head slot are
// dropped, every other tensor is copied.
Model ablate_model(const Model& base, std::string_view trait);

}  // namespace traitgrade
