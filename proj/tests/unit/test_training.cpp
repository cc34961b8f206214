#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "../support/fixtures.hpp"
#include "traitgrade/errors.hpp"
#include "traitgrade/synthetic.hpp"
#include "traitgrade/training.hpp"

using namespace traitgrade;
using traitgrade::testing::toy_config;

namespace {

struct ToyData {
  Vocabulary vocab;
  std::vector<Example> train, dev;
};

ToyData toy_data(const ModelConfig& config, std::size_t essays = 40) {
  SyntheticOptions opts;
  opts.prompts = {config.prompt_id};
  opts.essays_per_prompt = essays;
  opts.max_sentences = 4;
  opts.max_tokens = 6;
  const auto records = make_synthetic_records(opts);
  ToyData d;
  d.vocab = build_vocab(records, config.vocab_size - 2);
  const auto all = make_examples(records, d.vocab, config);
  const std::size_t cut = essays * 3 / 4;
  d.train.assign(all.begin(), all.begin() + static_cast<long>(cut));
  d.dev.assign(all.begin() + static_cast<long>(cut), all.end());
  return d;
}

std::vector<std::vector<Real>> snapshot(Model& m) {
  std::vector<std::vector<Real>> out;
  for (Tensor* p : m.parameters()) out.emplace_back(p->data().begin(), p->data().end());
  return out;
}

}  // namespace

TEST(RmsProp, ZeroGradientLeavesParametersAndDecaysState) {
  Tensor p({3}, 0.5);
  p.grad();
  Tensor* ps[] = {&p};
  OptimizerState state;
  state.mean_square = {{1.0, 2.0, 4.0}};
  state.velocity = {{}};
  rmsprop_step(ps, state, TrainConfig{});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(p[i], 0.5);
  EXPECT_NEAR(state.mean_square[0][0], 0.9, 1e-15);
  EXPECT_NEAR(state.mean_square[0][2], 3.6, 1e-15);
}

TEST(RmsProp, FirstStepWithUnitGradient) {
  Tensor p({2, 2}, 0.0);
  for (auto& g : p.grad()) g = 1;
  Tensor* ps[] = {&p};
  OptimizerState state;
  rmsprop_step(ps, state, TrainConfig{});
  const double expected = 0.001 / std::sqrt(0.1 + 1e-7);
  for (Real v : p.data()) EXPECT_NEAR(v, -expected, 1e-15);
  EXPECT_NEAR(expected, 0.003162, 1e-6);
}

TEST(RmsProp, MovesAgainstTheGradient) {
  Tensor p = Tensor::vector({1, -1});
  p.grad()[0] = 2;
  p.grad()[1] = -3;
  Tensor* ps[] = {&p};
  OptimizerState state;
  rmsprop_step(ps, state, TrainConfig{});
  EXPECT_LT(p[0], 1);
  EXPECT_GT(p[1], -1);
}

TEST(RmsProp, ZeroLearningRateChangesNothing) {
  Tensor p = Tensor::vector({0.3, 0.4});
  p.grad()[0] = 5;
  Tensor* ps[] = {&p};
  OptimizerState state;
  TrainConfig c;
  c.learning_rate = 0;
  rmsprop_step(ps, state, c);
  EXPECT_EQ(p[0], 0.3);
  EXPECT_EQ(p[1], 0.4);
}

TEST(RmsProp, MomentumVariantAccumulatesVelocity) {
  Tensor p({1}, 0.0);
  Tensor* ps[] = {&p};
  OptimizerState state;
  TrainConfig c;
  c.optimizer = OptimizerKind::rmsprop_momentum;
  p.grad()[0] = 1;
  rmsprop_step(ps, state, c);
  const Real first = p[0];
  rmsprop_step(ps, state, c);
  EXPECT_LT(p[0] - first, first);  // velocity makes the second step longer
}

TEST(RmsProp, StateMismatchIsAShapeError) {
  Tensor a({2}), b({3});
  Tensor* one[] = {&a};
  Tensor* two[] = {&a, &b};
  OptimizerState state;
  rmsprop_step(one, state, TrainConfig{});
  EXPECT_THROW(rmsprop_step(two, state, TrainConfig{}), ShapeError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.rms_decay = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_optimizer("adam"), ConfigError);
  EXPECT_EQ(parse_selection("mse"), SelectionMetric::mse);
}

TEST(Batches, SizesCoverEveryIndexOnce) {
  Rng rng(5);
  const auto b = batch_indices(250, 100, rng);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 100u);
  EXPECT_EQ(b[1].size(), 100u);
  EXPECT_EQ(b[2].size(), 50u);
  std::set<std::size_t> seen;
  for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
  EXPECT_EQ(seen.size(), 250u);
}

TEST(Batches, SameSeedSameOrder) {
  Rng a(11), b(11), c(12);
  EXPECT_EQ(batch_indices(50, 7, a), batch_indices(50, 7, b));
  Rng d(11);
  EXPECT_NE(batch_indices(50, 7, d), batch_indices(50, 7, c));
}

TEST(Batches, PaddingMasksMatchEssayShapes) {
  const auto config = toy_config(TaskMode::stl, RecurrentKind::lstm, 3, 30);
  const auto data = toy_data(config, 12);
  Rng rng(1);
  const auto batches = make_batches(data.train, 4, rng);
  ASSERT_EQ(batches.size(), 3u);
  for (const auto& batch : batches) {
    const auto& p = batch.padded;
    for (std::size_t b = 0; b < p.batch; ++b) {
      const auto& essay = data.train[batch.indices[b]].essay;
      for (std::size_t s = 0; s < p.sentences; ++s) {
        EXPECT_EQ(p.sentence_mask[b * p.sentences + s], s < essay.size() ? 1 : 0);
        for (std::size_t t = 0; t < p.tokens; ++t) {
          const bool real = s < essay.size() && t < essay[s].size();
          const std::size_t at = (b * p.sentences + s) * p.tokens + t;
          EXPECT_EQ(p.token_mask[at], real ? 1 : 0);
          EXPECT_EQ(p.token_ids[at], real ? essay[s][t] : Vocabulary::kPad);
        }
      }
    }
  }
}

TEST(Examples, TargetsFollowHeadOrder) {
  const auto config = toy_config(TaskMode::mtl, RecurrentKind::lstm, 3, 30);
  const auto data = toy_data(config, 8);
  const auto& spec = prompt_spec(3);
  for (const auto& e : data.train) {
    ASSERT_EQ(e.targets.size(), 5u);
    for (std::size_t k = 0; k < 5; ++k)
      EXPECT_EQ(e.targets[k], normalize_score(e.scores[k], spec.range_of(config.head_names()[k])));
  }
}

TEST(Train, HistoryHasOneRecordPerEpoch) {
  auto config = toy_config(TaskMode::stl, RecurrentKind::lstm, 3, 30);
  const auto data = toy_data(config);
  Model m(config);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  const auto r = train(m, data.train, data.dev, tc);
  ASSERT_EQ(r.history.size(), 3u);
  for (int e = 0; e < 3; ++e) {
    EXPECT_EQ(r.history[static_cast<std::size_t>(e)].epoch, e + 1);
    EXPECT_EQ(r.history[static_cast<std::size_t>(e)].dev_qwk.size(), 1u);
  }
}

TEST(Train, SelectionKeepsTheBestEpochsParameters) {
  auto config = toy_config(TaskMode::mtl, RecurrentKind::lstm, 3, 30);
  const auto data = toy_data(config);
  Model m(config);
  const std::vector<double> scores{0.1, 0.5, 0.5, 0.2};
  std::map<int, std::vector<std::vector<Real>>> seen;
  TrainHooks hooks;
  hooks.selection_score = [&](const EpochRecord& r) { return scores[static_cast<std::size_t>(r.epoch - 1)]; };
  hooks.on_epoch = [&](const EpochRecord& r) { seen[r.epoch] = snapshot(m); };
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 10;
  const auto r = train(m, data.train, data.dev, tc, hooks);
  EXPECT_EQ(r.best_epoch, 2);
  EXPECT_EQ(r.best_score, 0.5);
  EXPECT_EQ(snapshot(m), seen[2]);
  EXPECT_NE(snapshot(m), seen[4]);
}

TEST(Train, LossDecreasesOnASmallSet) {
  auto config = toy_config(TaskMode::stl, RecurrentKind::lstm, 3, 30);
  config.hyper.dropout = 0;
  const auto data = toy_data(config, 24);
  Model m(config);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 6;
  tc.learning_rate = 0.003;
  const auto r = train(m, data.train, {}, tc);
  EXPECT_LT(r.history.back().train_loss, 0.5 * r.history.front().train_loss);
}

TEST(Train, IsDeterministicForAFixedSeed) {
  auto config = toy_config(TaskMode::mtl, RecurrentKind::bilstm, 3, 30);
  const auto data = toy_data(config, 16);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 5;
  tc.seed = 17;
  Model a(config), b(config);
  train(a, data.train, data.dev, tc);
  train(b, data.train, data.dev, tc);
  EXPECT_EQ(snapshot(a), snapshot(b));
}

TEST(Train, NonFiniteLossAbortsWithDiagnostics) {
  auto config = toy_config(TaskMode::stl, RecurrentKind::lstm, 3, 30);
  const auto data = toy_data(config, 12);
  Model m(config);
  m.stacks()[0].head.b[0] = std::numeric_limits<Real>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  try {
    train(m, data.train, data.dev, tc);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_EQ(e.batch(), 0u);
    EXPECT_TRUE(std::isnan(e.loss()));
  }
}

TEST(Train, RejectsMismatchedTargets) {
  auto config = toy_config(TaskMode::stl, RecurrentKind::lstm, 3, 30);
  auto data = toy_data(config, 8);
  data.train[0].targets.push_back(0.5);
  Model m(config);
  EXPECT_THROW(train(m, data.train, data.dev, TrainConfig{}), ArgumentError);
  EXPECT_THROW(train(m, {}, data.dev, TrainConfig{}), ArgumentError);
}

TEST(Evaluate, PredictionsStayInRange) {
  auto config = toy_config(TaskMode::mtl, RecurrentKind::lstm, 8, 30);
  const auto data = toy_data(config, 10);
  Model m(config);
  const auto ev = evaluate(m, data.train, 3);
  ASSERT_EQ(ev.predictions.size(), 7u);
  for (std::size_t h = 0; h < 7; ++h) {
    const auto range = prompt_spec(8).range_of(m.heads()[h]);
    for (int s : ev.predictions[h]) EXPECT_TRUE(range.contains(s));
    EXPECT_GE(ev.mse[h], 0);
  }
  // Batch size does not change eval-mode predictions.
  EXPECT_EQ(predict(m, data.train, 3), predict(m, data.train, 100));
}

TEST(Runtime, SumsPerConfigAndComputesSpeedups) {
  std::vector<TimingRecord> records;
  for (int fold = 0; fold < 2; ++fold) {
    records.push_back({1, "stl-lstm", fold, 10});
    records.push_back({1, "stl-lstm.content", fold, 10});
    records.push_back({1, "stl-lstm.organization", fold, 10});
    records.push_back({1, "mtl-lstm", fold, 10});
    records.push_back({1, "mtl-lstm-minus-content", fold, 99});
    records.push_back({1, "stl-bilstm", fold, 4});
    records.push_back({1, "mtl-bilstm", fold, 8});
  }
  const auto r = measure_runtime(records);
  EXPECT_EQ(r.seconds_by_config.at("stl-lstm.content"), 20);
  EXPECT_EQ(r.seconds_by_config.at("mtl-lstm-minus-content"), 198);
  EXPECT_EQ(r.stl_seconds.at("lstm"), 60);
  EXPECT_EQ(r.mtl_seconds.at("lstm"), 20);
  EXPECT_EQ(r.speedup.at("lstm"), 3);
  EXPECT_EQ(r.speedup.at("bilstm"), 0.5);
}

TEST(Runtime, EqualTimesGiveHeadCount) {
  const std::vector<double> stl(6, 12.5);
  EXPECT_EQ(speedup_ratio(stl, 12.5), 6);
  EXPECT_THROW(speedup_ratio(stl, 0), ArgumentError);
}
