#include "traitgrade/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "traitgrade/errors.hpp"
#include "traitgrade/metrics.hpp"

namespace traitgrade {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<Real>> snapshot(std::span<Tensor* const> params) {
  std::vector<std::vector<Real>> out;
  out.reserve(params.size());
  for (const Tensor* p : params) out.emplace_back(p->data().begin(), p->data().end());
  return out;
}

void restore(std::span<Tensor* const> params, const std::vector<std::vector<Real>>& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(saved[i].begin(), saved[i].end(), params[i]->data().begin());
}

std::vector<const EncodedEssay*> essays_of(std::span<const Example> examples, std::span<const std::size_t> indices) {
  std::vector<const EncodedEssay*> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(&examples[i].essay);
  return out;
}

double batch_loss_value(Var loss, int epoch, std::size_t batch) {
  const double v = loss.value().item();
  if (!std::isfinite(v)) throw NonFiniteLossError(epoch, batch, v);
  return v;
}

}  // namespace

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::rmsprop ? "rmsprop" : "rmsprop_momentum";
}
std::string_view to_string(SelectionMetric m) { return m == SelectionMetric::qwk ? "qwk" : "mse"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "rmsprop_momentum") return OptimizerKind::rmsprop_momentum;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected rmsprop or rmsprop_momentum)");
}

SelectionMetric parse_selection(std::string_view s) {
  if (s == "qwk") return SelectionMetric::qwk;
  if (s == "mse") return SelectionMetric::mse;
  throw ConfigError("unknown selection metric '" + std::string(s) + "' (expected qwk or mse)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be non-negative");
  if (!(rms_decay > 0 && rms_decay < 1)) throw ConfigError("rms_decay must lie in (0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
}

void rmsprop_step(std::span<Tensor* const> params, OptimizerState& state, const TrainConfig& config) {
  if (state.mean_square.empty()) {
    for (const Tensor* p : params) {
      state.mean_square.emplace_back(p->size(), Real{0});
      state.velocity.emplace_back(config.optimizer == OptimizerKind::rmsprop_momentum ? p->size() : 0, Real{0});
    }
  }
  if (state.mean_square.size() != params.size())
    throw ShapeError("optimizer state tracks " + std::to_string(state.mean_square.size()) + " tensors, got " +
                     std::to_string(params.size()));
  const Real rho = static_cast<Real>(config.rms_decay);
  const Real lr = static_cast<Real>(config.learning_rate);
  const Real eps = static_cast<Real>(config.epsilon);
  const Real mu = static_cast<Real>(config.momentum);
  const bool use_velocity = config.optimizer == OptimizerKind::rmsprop_momentum;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto& s = state.mean_square[k];
    if (s.size() != p.size())
      throw ShapeError("optimizer state for tensor " + std::to_string(k) + " has " + std::to_string(s.size()) +
                       " entries, tensor has " + std::to_string(p.size()));
    if (!p.has_grad()) {
      for (auto& x : s) x *= rho;
      continue;
    }
    const auto g = std::as_const(p).grad();
    auto data = p.data();
    auto& v = state.velocity[k];
    if (use_velocity && v.size() != p.size()) v.assign(p.size(), Real{0});
    for (std::size_t i = 0; i < p.size(); ++i) {
      s[i] = rho * s[i] + (1 - rho) * g[i] * g[i];
      const Real step = lr * g[i] / std::sqrt(s[i] + eps);
      if (use_velocity) {
        v[i] = mu * v[i] - step;
        data[i] += v[i];
      } else {
        data[i] -= step;
      }
    }
  }
}

std::vector<Example> make_examples(std::span<const EssayRecord> records, const Vocabulary& vocab,
                                   const ModelConfig& config) {
  const auto heads = config.head_names();
  const PromptSpec& prompt = config.prompt();
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Example e;
    e.essay_id = r.essay_id;
    e.essay = encode_essay(r, vocab);
    for (const auto& h : heads) {
      const int s = r.score_of(h);
      e.scores.push_back(s);
      e.targets.push_back(static_cast<Real>(normalize_score(s, prompt.range_of(h))));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size, Rng& rng) {
  std::vector<Batch> out;
  for (auto& idx : batch_indices(examples.size(), batch_size, rng)) {
    const auto essays = essays_of(examples, idx);
    out.push_back({std::move(idx), pad_batch(essays)});
  }
  return out;
}

std::vector<std::vector<Real>> predict(Model& model, std::span<const Example> examples, std::size_t batch_size) {
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  std::vector<std::vector<Real>> out(model.heads().size());
  Rng unused(0);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) idx.push_back(i);
    Tape tape;
    const auto outputs = forward_batch(tape, model, pad_batch(essays_of(examples, idx)), Mode::eval, unused);
    for (std::size_t k = 0; k < outputs.heads.size(); ++k)
      for (Real v : outputs.heads[k].value().data()) out[k].push_back(v);
  }
  return out;
}

HeadEvaluation evaluate(Model& model, std::span<const Example> examples, std::size_t batch_size) {
  const auto preds = predict(model, examples, batch_size);
  const PromptSpec& prompt = model.config().prompt();
  HeadEvaluation ev;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const ScoreRange range = prompt.range_of(model.heads()[k]);
    std::vector<int> ints, gold;
    double se = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      ints.push_back(denormalize_score(preds[k][i], range));
      gold.push_back(examples[i].scores[k]);
      const double e = preds[k][i] - examples[i].targets[k];
      se += e * e;
    }
    ev.qwk.push_back(examples.size() >= 2 ? qwk(ints, gold, range) : 0.0);
    ev.mse.push_back(examples.empty() ? 0.0 : se / static_cast<double>(examples.size()));
    ev.predictions.push_back(std::move(ints));
  }
  return ev;
}

TrainResult train(Model& model, std::span<const Example> train_set, std::span<const Example> dev_set,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  const std::size_t heads = model.heads().size();
  for (const auto& e : train_set)
    if (e.targets.size() != heads)
      throw ArgumentError("example " + std::to_string(e.essay_id) + " has " + std::to_string(e.targets.size()) +
                          " targets for " + std::to_string(heads) + " heads");

  const auto start = Clock::now();
  const auto params = model.parameters();
  OptimizerState state;
  Rng dropout_rng = derive_rng(config.seed, 0x64726f70);
  TrainResult result;
  std::vector<std::vector<Real>> best;
  bool have_best = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    Rng order_rng = derive_rng(config.seed, static_cast<std::uint64_t>(epoch));
    const auto batches = batch_indices(train_set.size(), config.batch_size, order_rng);
    double loss_sum = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      Tape tape;
      const auto outputs = forward_batch(tape, model, pad_batch(essays_of(train_set, idx)), Mode::train, dropout_rng);
      std::vector<Var> golds;
      for (std::size_t k = 0; k < heads; ++k) {
        Tensor g({idx.size(), 1});
        for (std::size_t i = 0; i < idx.size(); ++i) g[i] = train_set[idx[i]].targets[k];
        golds.push_back(tape.constant(std::move(g)));
      }
      const Var loss = mtl_loss(outputs.heads, golds);
      loss_sum += batch_loss_value(loss, epoch, b) * static_cast<double>(idx.size());
      zero_grads(params);
      tape.backward(loss);
      rmsprop_step(params, state, config);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (!dev_set.empty()) {
      const auto ev = evaluate(model, dev_set, config.batch_size);
      rec.dev_qwk = ev.qwk;
      rec.dev_mse = ev.mse;
    }
    rec.seconds = seconds_since(epoch_start);

    double score;
    if (hooks.selection_score) score = hooks.selection_score(rec);
    else if (rec.dev_qwk.empty()) score = -rec.train_loss;
    else score = config.selection == SelectionMetric::qwk ? rec.dev_qwk[0] : -rec.dev_mse[0];

    if (!have_best || score > result.best_score) {
      have_best = true;
      result.best_score = score;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    result.history.push_back(std::move(rec));
  }
  zero_grads(params);
  restore(params, best);
  result.seconds = seconds_since(start);
  return result;
}

RuntimeReport measure_runtime(std::span<const TimingRecord> records) {
  RuntimeReport r;
  for (const auto& t : records) {
    r.seconds_by_config[t.config] += t.seconds;
    if (t.config.find("-minus-") != std::string::npos) continue;
    const auto dash = t.config.find('-');
    if (dash == std::string::npos) continue;
    const std::string mode = t.config.substr(0, dash);
    const std::string recurrent = t.config.substr(dash + 1, t.config.find('.', dash) - dash - 1);
    if (mode == "stl") r.stl_seconds[recurrent] += t.seconds;
    else if (mode == "mtl") r.mtl_seconds[recurrent] += t.seconds;
  }
  for (const auto& [kind, mtl] : r.mtl_seconds) {
    auto it = r.stl_seconds.find(kind);
    if (it != r.stl_seconds.end() && mtl > 0) r.speedup[kind] = it->second / mtl;
  }
  return r;
}

double speedup_ratio(std::span<const double> stl_seconds, double mtl_seconds) {
  if (!(mtl_seconds > 0)) throw ArgumentError("MTL time must be positive");
  double total = 0;
  for (double s : stl_seconds) total += s;
  return total / mtl_seconds;
}

}  // namespace traitgrade
