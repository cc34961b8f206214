#include <benchmark/benchmark.h>

#include "traitgrade/metrics.hpp"
#include "traitgrade/model.hpp"
#include "traitgrade/rng.hpp"
#include "traitgrade/training.hpp"

using namespace traitgrade;

namespace {

EncodedEssay make_essay(Rng& rng, std::size_t sentences, std::size_t tokens, std::size_t vocab) {
  EncodedEssay e(sentences, std::vector<int>(tokens));
  for (auto& s : e)
    for (auto& id : s) id = 2 + static_cast<int>(uniform_index(rng, vocab - 2));
  return e;
}

ModelConfig bench_config(TaskMode mode, RecurrentKind rec) {
  ModelConfig c;
  c.mode = mode;
  c.recurrent = rec;
  c.prompt_id = 8;
  c.vocab_size = 4002;
  return c;
}

// Full-size forward and backward over one batch of essays shaped like the corpus.
void bm_train_step(benchmark::State& state) {
  const auto mode = state.range(0) ? TaskMode::mtl : TaskMode::stl;
  const auto rec = state.range(1) ? RecurrentKind::bilstm : RecurrentKind::lstm;
  Model model(bench_config(mode, rec));
  Rng rng(1);
  std::vector<EncodedEssay> essays;
  for (int i = 0; i < 10; ++i) essays.push_back(make_essay(rng, 15, 20, 4002));
  std::vector<const EncodedEssay*> ptrs;
  for (const auto& e : essays) ptrs.push_back(&e);
  const auto batch = pad_batch(ptrs);
  const auto params = model.parameters();
  for (auto _ : state) {
    Tape tape;
    const auto out = forward_batch(tape, model, batch, Mode::train, rng);
    std::vector<Var> golds;
    for (std::size_t k = 0; k < out.heads.size(); ++k) golds.push_back(tape.constant(Tensor({batch.batch, 1}, 0.5)));
    const Var loss = mtl_loss(out.heads, golds);
    zero_grads(params);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 10);
}
BENCHMARK(bm_train_step)
    ->ArgNames({"mtl", "bilstm"})
    ->Args({0, 0})
    ->Args({0, 1})
    ->Args({1, 0})
    ->Args({1, 1})
    ->Unit(benchmark::kMillisecond);

void bm_predict_essay(benchmark::State& state) {
  Model model(bench_config(TaskMode::stl, RecurrentKind::lstm));
  Rng rng(2);
  const auto essay = make_essay(rng, static_cast<std::size_t>(state.range(0)), 20, 4002);
  for (auto _ : state) benchmark::DoNotOptimize(forward_stl(model, essay, Mode::eval, rng));
}
BENCHMARK(bm_predict_essay)->Arg(5)->Arg(20)->Arg(60)->Unit(benchmark::kMicrosecond);

void bm_qwk(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<int> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<int>(uniform_index(rng, 61));
    b[i] = static_cast<int>(uniform_index(rng, 61));
  }
  for (auto _ : state) benchmark::DoNotOptimize(qwk(a, b, ScoreRange{0, 60}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(bm_qwk)->Arg(100)->Arg(1800)->Arg(100000);

void bm_rmsprop(benchmark::State& state) {
  Model model(bench_config(TaskMode::mtl, RecurrentKind::bilstm));
  const auto params = model.parameters();
  for (Tensor* p : params)
    for (auto& g : p->grad()) g = 1e-3;
  OptimizerState opt;
  TrainConfig cfg;
  for (auto _ : state) rmsprop_step(params, opt, cfg);
}
BENCHMARK(bm_rmsprop)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
