#include "traitgrade/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "traitgrade/errors.hpp"
#include "traitgrade/glove.hpp"

namespace traitgrade {

namespace {

constexpr std::array<std::string_view, 4> kGateNames{"input", "forget", "output", "cell"};

std::string slug(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

struct StackVars {
  ConvVars conv;
  AttentionVars word_attention;
  LstmVars forward;
  std::optional<LstmVars> backward;
  AttentionVars sentence_attention;
  DenseVars head;
};

StackVars bind_stack(Tape& tape, StackParams& p) {
  StackVars v{bind(tape, p.conv), bind(tape, p.word_attention), bind(tape, p.forward), std::nullopt,
              bind(tape, p.sentence_attention), bind(tape, p.head)};
  if (p.backward) v.backward = bind(tape, *p.backward);
  return v;
}

std::vector<Var> run_recurrent(const StackVars& v, std::span<const Var> steps,
                               std::span<const std::vector<std::uint8_t>> masks) {
  if (v.backward) return layers::bilstm_forward(steps, v.forward, *v.backward, masks);
  return layers::lstm_forward(steps, v.forward, masks);
}

Var maybe_dropout(Var x, bool enabled, const Hyperparams& h, Mode mode, Rng& rng) {
  return enabled ? layers::dropout(x, static_cast<Real>(h.dropout), mode, rng) : x;
}

// Essay representation of one stack over a padded batch whose embedded tokens are `x`.
Var stack_batch(const StackVars& v, Var x, const PaddedBatch& batch, const Hyperparams& h, Mode mode, Rng& rng) {
  const std::size_t B = batch.batch, S = batch.sentences, T = batch.tokens;
  const Var conv = layers::conv1d(x, v.conv, T);
  Var sentences = layers::attention_pool(conv, v.word_attention, T, batch.token_mask);
  sentences = maybe_dropout(sentences, h.dropout_sentences, h, mode, rng);

  std::vector<Var> steps(S);
  std::vector<std::vector<std::uint8_t>> masks(S, std::vector<std::uint8_t>(B));
  std::vector<std::size_t> rows(B);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t b = 0; b < B; ++b) {
      rows[b] = b * S + s;
      masks[s][b] = batch.sentence_mask[b * S + s];
    }
    steps[s] = ops::gather_rows(sentences, rows);
  }
  const auto states = run_recurrent(v, steps, masks);
  const Var H = ops::interleave_steps(states);
  Var essay = layers::attention_pool(H, v.sentence_attention, S, batch.sentence_mask);
  return maybe_dropout(essay, h.dropout_essay, h, mode, rng);
}

Var stack_essay(const StackVars& v, Var table, const EncodedEssay& essay, const Hyperparams& h, Mode mode,
                Rng& rng) {
  std::vector<Var> steps;
  steps.reserve(essay.size());
  for (const auto& sentence : essay) {
    const Var x = layers::embed(table, sentence);
    const Var conv = layers::conv1d(x, v.conv);
    steps.push_back(maybe_dropout(layers::attention_pool(conv, v.word_attention), h.dropout_sentences, h, mode, rng));
  }
  const auto states = run_recurrent(v, steps, {});
  const Var H = ops::interleave_steps(states);
  return maybe_dropout(layers::attention_pool(H, v.sentence_attention), h.dropout_essay, h, mode, rng);
}

// Applies the dense heads. For MTL the overall head (index 0) sees the overall essay
// vector concatenated with every trait prediction.
HeadOutputs apply_heads(const Model& model, std::span<const StackVars> vars, std::span<const Var> reps) {
  HeadOutputs out;
  out.heads.resize(reps.size());
  if (model.config().mode == TaskMode::stl) {
    out.heads[0] = layers::dense_sigmoid(reps[0], vars[0].head);
    return out;
  }
  std::vector<Var> overall_in{reps[0]};
  for (std::size_t k = 1; k < reps.size(); ++k) {
    out.heads[k] = layers::dense_sigmoid(reps[k], vars[k].head);
    overall_in.push_back(out.heads[k]);
  }
  out.heads[0] = layers::dense_sigmoid(ops::concat_cols(overall_in), vars[0].head);
  return out;
}

void require_nonempty(const EncodedEssay& essay) {
  if (essay.empty()) throw ArgumentError("essay has no sentences");
  for (const auto& s : essay)
    if (s.empty()) throw ArgumentError("essay contains an empty sentence");
}

}  // namespace

std::string_view to_string(RecurrentKind k) { return k == RecurrentKind::lstm ? "lstm" : "bilstm"; }
std::string_view to_string(TaskMode m) { return m == TaskMode::stl ? "stl" : "mtl"; }

RecurrentKind parse_recurrent(std::string_view s) {
  if (s == "lstm") return RecurrentKind::lstm;
  if (s == "bilstm") return RecurrentKind::bilstm;
  throw ConfigError("unknown recurrent layer '" + std::string(s) + "' (expected lstm or bilstm)");
}

TaskMode parse_mode(std::string_view s) {
  if (s == "stl") return TaskMode::stl;
  if (s == "mtl") return TaskMode::mtl;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected stl or mtl)");
}

std::vector<std::string> ModelConfig::head_names() const {
  if (mode == TaskMode::stl) return {stl_target};
  std::vector<std::string> heads{std::string(kOverall)};
  for (const auto& t : prompt().traits)
    if (std::find(ablated_traits.begin(), ablated_traits.end(), t) == ablated_traits.end()) heads.push_back(t);
  return heads;
}

std::string ModelConfig::name() const {
  std::string n = std::string(to_string(mode)) + "-" + std::string(to_string(recurrent));
  if (mode == TaskMode::stl && stl_target != kOverall) n += "." + slug(stl_target);
  for (const auto& t : ablated_traits) n += "-minus-" + slug(t);
  return n;
}

void ModelConfig::validate() const {
  const PromptSpec& spec = prompt();
  if (mode == TaskMode::stl && stl_target != kOverall && !spec.has_trait(stl_target))
    throw ConfigError("prompt " + std::to_string(prompt_id) + " has no trait '" + stl_target + "'");
  if (mode == TaskMode::stl && !ablated_traits.empty()) throw ConfigError("trait ablation requires mtl mode");
  for (const auto& t : ablated_traits)
    if (!spec.has_trait(t))
      throw ConfigError("cannot ablate '" + t + "': prompt " + std::to_string(prompt_id) + " has no such trait");
  if (hyper.embed_dim == 0 || hyper.window == 0 || hyper.filters == 0 || hyper.hidden == 0)
    throw ConfigError("layer sizes must be positive");
  if (!(hyper.dropout >= 0 && hyper.dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (vocab_size < 3) throw ConfigError("vocabulary needs at least one content word");
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["recurrent"] = to_string(c.recurrent);
  j["mode"] = to_string(c.mode);
  j["stl_target"] = c.stl_target;
  j["prompt"] = c.prompt_id;
  j["embed_dim"] = c.hyper.embed_dim;
  j["window"] = c.hyper.window;
  j["filters"] = c.hyper.filters;
  j["hidden"] = c.hyper.hidden;
  j["dropout"] = c.hyper.dropout;
  j["dropout_sentences"] = c.hyper.dropout_sentences;
  j["dropout_essay"] = c.hyper.dropout_essay;
  j["vocab_size"] = c.vocab_size;
  j["seed"] = c.seed;
  j["ablated_traits"] = c.ablated_traits;
  return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.recurrent = parse_recurrent(j.at("recurrent").get<std::string>());
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.stl_target = j.at("stl_target").get<std::string>();
    c.prompt_id = j.at("prompt").get<int>();
    c.hyper.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hyper.window = j.at("window").get<std::size_t>();
    c.hyper.filters = j.at("filters").get<std::size_t>();
    c.hyper.hidden = j.at("hidden").get<std::size_t>();
    c.hyper.dropout = j.at("dropout").get<double>();
    c.hyper.dropout_sentences = j.at("dropout_sentences").get<bool>();
    c.hyper.dropout_essay = j.at("dropout_essay").get<bool>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.ablated_traits = j.at("ablated_traits").get<std::vector<std::string>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  heads_ = config_.head_names();
  const Hyperparams& h = config_.hyper;
  Rng rng(config_.seed);

  embedding_ = Tensor({config_.vocab_size, h.embed_dim});
  for (std::size_t i = 1; i < config_.vocab_size; ++i)
    for (std::size_t j = 0; j < h.embed_dim; ++j) embedding_.at(i, j) = static_cast<Real>(uniform(rng, -0.05, 0.05));
  embedding_.set_requires_grad(true);

  const std::size_t r = h.hidden * config_.directions();
  const std::size_t traits_in = config_.mode == TaskMode::mtl ? heads_.size() - 1 : 0;
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    StackParams s;
    s.conv = init_conv(h.window, h.embed_dim, h.filters, rng);
    s.word_attention = init_attention(h.filters, rng);
    s.forward = init_lstm(h.filters, h.hidden, rng);
    if (config_.recurrent == RecurrentKind::bilstm) s.backward = init_lstm(h.filters, h.hidden, rng);
    s.sentence_attention = init_attention(r, rng);
    s.head = init_dense(k == 0 ? r + traits_in : r, rng);
    stacks_.push_back(std::move(s));
  }
}

std::size_t Model::head_index(std::string_view head) const {
  auto it = std::find(heads_.begin(), heads_.end(), head);
  if (it == heads_.end()) throw ArgumentError("model has no head '" + std::string(head) + "'");
  return static_cast<std::size_t>(it - heads_.begin());
}

std::vector<NamedTensor> Model::named_parameters() {
  std::vector<NamedTensor> out{{"embedding", &embedding_}};
  auto add_attention = [&out](const std::string& prefix, AttentionParams& a) {
    out.push_back({prefix + "/W", &a.W});
    out.push_back({prefix + "/b", &a.b});
    out.push_back({prefix + "/v", &a.v});
  };
  auto add_lstm = [&out](const std::string& prefix, LstmParams& l) {
    for (std::size_t g = 0; g < 4; ++g) {
      const std::string gp = prefix + "/" + std::string(kGateNames[g]);
      out.push_back({gp + "/W", &l.gates[g].W});
      out.push_back({gp + "/U", &l.gates[g].U});
      out.push_back({gp + "/b", &l.gates[g].b});
    }
  };
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const std::string p = slug(heads_[k]);
    StackParams& s = stacks_[k];
    out.push_back({p + "/conv/kernel", &s.conv.kernel});
    out.push_back({p + "/conv/bias", &s.conv.bias});
    add_attention(p + "/word_attention", s.word_attention);
    add_lstm(p + "/lstm_forward", s.forward);
    if (s.backward) add_lstm(p + "/lstm_backward", *s.backward);
    add_attention(p + "/sentence_attention", s.sentence_attention);
    out.push_back({p + "/dense/w", &s.head.w});
    out.push_back({p + "/dense/b", &s.head.b});
  }
  return out;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& n : named_parameters()) out.push_back(n.tensor);
  return out;
}

ParamCount Model::count_params() const {
  ParamCount c;
  c.breakdown.emplace_back("embedding", embedding_.size());
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    const std::string p = slug(heads_[k]);
    const StackParams& s = stacks_[k];
    c.breakdown.emplace_back(p + "/conv", count(s.conv));
    c.breakdown.emplace_back(p + "/word_attention", count(s.word_attention));
    c.breakdown.emplace_back(p + "/lstm_forward", count(s.forward));
    if (s.backward) c.breakdown.emplace_back(p + "/lstm_backward", count(*s.backward));
    c.breakdown.emplace_back(p + "/sentence_attention", count(s.sentence_attention));
    c.breakdown.emplace_back(p + "/dense", count(s.head));
  }
  for (const auto& [_, n] : c.breakdown) c.total += n;
  return c;
}

std::size_t Model::load_pretrained(const GloveTable& glove, const Vocabulary& vocab) {
  if (glove.vectors.empty()) return 0;
  if (glove.dim != config_.hyper.embed_dim)
    throw ConfigError("GloVe vectors have " + std::to_string(glove.dim) + " dimensions but the model embeds into " +
                      std::to_string(config_.hyper.embed_dim));
  if (vocab.size() > config_.vocab_size)
    throw ConfigError("vocabulary of " + std::to_string(vocab.size()) + " exceeds the embedding table");
  std::size_t copied = 0;
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    auto it = glove.vectors.find(vocab.token(static_cast<int>(id)));
    if (it == glove.vectors.end()) continue;
    for (std::size_t j = 0; j < glove.dim; ++j) embedding_.at(id, j) = it->second[j];
    ++copied;
  }
  return copied;
}

PaddedBatch pad_batch(std::span<const EncodedEssay* const> essays) {
  if (essays.empty()) throw ArgumentError("cannot pad an empty batch");
  PaddedBatch b;
  b.batch = essays.size();
  for (const auto* e : essays) {
    require_nonempty(*e);
    b.sentences = std::max(b.sentences, e->size());
    for (const auto& s : *e) b.tokens = std::max(b.tokens, s.size());
  }
  const std::size_t S = b.sentences, T = b.tokens;
  b.token_ids.assign(b.batch * S * T, Vocabulary::kPad);
  b.token_mask.assign(b.batch * S * T, 0);
  b.sentence_mask.assign(b.batch * S, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto& essay = *essays[i];
    for (std::size_t s = 0; s < essay.size(); ++s) {
      b.sentence_mask[i * S + s] = 1;
      for (std::size_t t = 0; t < essay[s].size(); ++t) {
        b.token_ids[(i * S + s) * T + t] = essay[s][t];
        b.token_mask[(i * S + s) * T + t] = 1;
      }
    }
  }
  return b;
}

HeadOutputs forward_batch(Tape& tape, Model& model, const PaddedBatch& batch, Mode mode, Rng& rng) {
  const Var table = tape.parameter(model.embedding());
  const Var x = layers::embed(table, batch.token_ids, batch.token_mask);
  std::vector<StackVars> vars;
  std::vector<Var> reps;
  for (auto& stack : model.stacks()) {
    vars.push_back(bind_stack(tape, stack));
    reps.push_back(stack_batch(vars.back(), x, batch, model.config().hyper, mode, rng));
  }
  return apply_heads(model, vars, reps);
}

HeadOutputs forward_essay(Tape& tape, Model& model, const EncodedEssay& essay, Mode mode, Rng& rng) {
  require_nonempty(essay);
  const Var table = tape.parameter(model.embedding());
  std::vector<StackVars> vars;
  std::vector<Var> reps;
  for (auto& stack : model.stacks()) {
    vars.push_back(bind_stack(tape, stack));
    reps.push_back(stack_essay(vars.back(), table, essay, model.config().hyper, mode, rng));
  }
  return apply_heads(model, vars, reps);
}

Real forward_stl(Model& model, const EncodedEssay& essay, Mode mode, Rng& rng) {
  if (model.config().mode != TaskMode::stl) throw ArgumentError("forward_stl needs an STL model");
  Tape tape;
  return forward_essay(tape, model, essay, mode, rng).heads[0].value().item();
}

MtlOutput forward_mtl(Model& model, const EncodedEssay& essay, Mode mode, Rng& rng) {
  if (model.config().mode != TaskMode::mtl) throw ArgumentError("forward_mtl needs an MTL model");
  Tape tape;
  const auto out = forward_essay(tape, model, essay, mode, rng);
  MtlOutput r;
  r.overall = out.heads[0].value().item();
  for (std::size_t k = 1; k < out.heads.size(); ++k) r.traits.push_back(out.heads[k].value().item());
  return r;
}

Real mtl_loss(std::span<const Real> preds, std::span<const Real> golds) {
  if (preds.size() != golds.size())
    throw ArgumentError("mtl_loss: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(golds.size()) + " targets");
  if (preds.empty()) throw ArgumentError("mtl_loss: no heads");
  Real total = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) total += (preds[k] - golds[k]) * (preds[k] - golds[k]);
  return total / static_cast<Real>(preds.size());
}

Var mtl_loss(std::span<const Var> preds, std::span<const Var> golds) {
  if (preds.size() != golds.size() || preds.empty())
    throw ArgumentError("mtl_loss: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(golds.size()) + " targets");
  Var total = layers::mse_loss(preds[0], golds[0]);
  for (std::size_t k = 1; k < preds.size(); ++k) total = ops::add(total, layers::mse_loss(preds[k], golds[k]));
  return preds.size() == 1 ? total : ops::scale(total, Real{1} / static_cast<Real>(preds.size()));
}

Aggregation Aggregation::parse(std::string_view spec) {
  Aggregation a;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string_view::npos) end = spec.size();
    std::string item(spec.substr(start, end - start));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    start = end + 1;
    if (item.empty()) {
      if (end == spec.size()) break;
      continue;
    }
    if (item.rfind("round=", 0) == 0) {
      const std::string rule = item.substr(6);
      if (rule == "half_away" || rule == "half_away_from_zero") a.rounding = Rounding::half_away_from_zero;
      else if (rule == "floor") a.rounding = Rounding::floor;
      else if (rule == "ceil") a.rounding = Rounding::ceil;
      else throw ConfigError("unknown rounding rule '" + rule + "'");
      continue;
    }
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) {
        a.intercept += std::stod(item);
        continue;
      }
      const std::string name = item.substr(0, colon);
      const auto canonical = canonical_trait_name(name);
      if (!canonical) throw ConfigError("aggregation references unknown trait '" + name + "'");
      a.coefficients[*canonical] += std::stod(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("malformed aggregation term '" + item + "'");
    }
    if (end == spec.size()) break;
  }
  if (a.coefficients.empty()) throw ConfigError("aggregation has no trait terms");
  return a;
}

int pipeline_holistic(const std::map<std::string, int>& trait_preds, const Aggregation& aggregation,
                      ScoreRange overall_range) {
  double value = aggregation.intercept;
  for (const auto& [t, coef] : aggregation.coefficients) {
    auto it = trait_preds.find(t);
    if (it == trait_preds.end()) throw ConfigError("aggregation references unknown trait '" + t + "'");
    value += coef * it->second;
  }
  double rounded = 0;
  switch (aggregation.rounding) {
    case Rounding::half_away_from_zero: rounded = std::round(value); break;
    case Rounding::floor: rounded = std::floor(value); break;
    case Rounding::ceil: rounded = std::ceil(value); break;
  }
  rounded = std::clamp(rounded, static_cast<double>(overall_range.min), static_cast<double>(overall_range.max));
  return static_cast<int>(rounded);
}

Model ablate_model(const Model& base, std::string_view trait) {
  if (base.config().mode != TaskMode::mtl) throw ConfigError("trait ablation requires an MTL model");
  ModelConfig cfg = base.config();
  if (std::find(cfg.ablated_traits.begin(), cfg.ablated_traits.end(), trait) != cfg.ablated_traits.end())
    throw ConfigError("trait '" + std::string(trait) + "' is already ablated");
  if (!cfg.prompt().has_trait(trait))
    throw ConfigError("cannot ablate '" + std::string(trait) + "': prompt " + std::to_string(cfg.prompt_id) +
                      " has no such trait");
  cfg.ablated_traits.emplace_back(trait);
  Model out(cfg);
  out.embedding() = base.embedding();

  const std::size_t removed = base.head_index(trait);
  for (std::size_t k = 0; k < out.heads().size(); ++k) out.stacks()[k] = base.stacks()[base.head_index(out.heads()[k])];

  // The overall head input is [essay vector (r), trait predictions in head order].
  const Tensor& w = base.stacks()[0].head.w;
  const std::size_t r = base.config().hyper.hidden * base.config().directions();
  const std::size_t slot = r + removed - 1;
  Tensor trimmed({w.rows() - 1, 1});
  for (std::size_t i = 0, j = 0; i < w.rows(); ++i)
    if (i != slot) trimmed[j++] = w[i];
  trimmed.set_requires_grad(true);
  out.stacks()[0].head.w = std::move(trimmed);
  return out;
}

}  // namespace traitgrade
