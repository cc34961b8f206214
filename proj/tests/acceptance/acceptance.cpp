// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run every criterion
//   acceptance --only N   run criterion N

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "../support/fixtures.hpp"
#include "traitgrade/checkpoint.hpp"
#include "traitgrade/experiment.hpp"
#include "traitgrade/report.hpp"
#include "traitgrade/synthetic.hpp"
#include "traitgrade/training.hpp"

using namespace traitgrade;
using namespace traitgrade::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v, int precision = 6) {
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

const std::vector<std::pair<TaskMode, RecurrentKind>> kConfigs{{TaskMode::stl, RecurrentKind::lstm},
                                                               {TaskMode::stl, RecurrentKind::bilstm},
                                                               {TaskMode::mtl, RecurrentKind::lstm},
                                                               {TaskMode::mtl, RecurrentKind::bilstm}};

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("traitgrade_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome gradient_integrity() {
  Outcome o;
  Rng rng(5);
  std::vector<EncodedEssay> essays;
  for (int i = 0; i < 3; ++i) essays.push_back(random_essay(rng, 1, 3, 2, 6, 20));
  std::vector<const EncodedEssay*> ptrs;
  for (auto& e : essays) ptrs.push_back(&e);
  const PaddedBatch batch = pad_batch(ptrs);
  for (auto [mode, rec] : kConfigs) {
    Model model(toy_config(mode, rec));
    const std::size_t heads = model.heads().size();
    std::vector<Tensor> golds;
    for (std::size_t k = 0; k < heads; ++k) {
      Tensor g({3, 1});
      for (auto& v : g.data()) v = static_cast<Real>(uniform01(rng));
      golds.push_back(g);
    }
    auto loss = [&](Tape& tape) {
      Rng dropout(99);
      const auto out = forward_batch(tape, model, batch, Mode::train, dropout);
      std::vector<Var> g;
      for (auto& t : golds) g.push_back(tape.constant(t));
      return mtl_loss(out.heads, g);
    };
    const auto r = gradient_check(model, loss);
    o.check(r.above_tolerance == 0, model.config().name() + " " + std::to_string(r.coordinates) +
                                        " coords, max rel err " + num(r.max_relative_error, 3) + " at " + r.worst);
  }
  return o;
}

Outcome parameter_counts() {
  Outcome o;
  auto total = [](TaskMode mode, RecurrentKind rec, int prompt) {
    ModelConfig c;
    c.mode = mode;
    c.recurrent = rec;
    c.prompt_id = prompt;
    c.vocab_size = 4002;
    return Model(c).count_params().total;
  };
  auto within = [](std::size_t v, double target, double tol) { return std::abs(static_cast<double>(v) - target) <= tol; };
  // Prompt 3 scores four traits, prompt 8 six.
  const auto stl_lstm = total(TaskMode::stl, RecurrentKind::lstm, 1);
  const auto stl_bilstm = total(TaskMode::stl, RecurrentKind::bilstm, 1);
  const auto mtl_lstm_4 = total(TaskMode::mtl, RecurrentKind::lstm, 3);
  const auto mtl_lstm_6 = total(TaskMode::mtl, RecurrentKind::lstm, 8);
  const auto mtl_bilstm_4 = total(TaskMode::mtl, RecurrentKind::bilstm, 3);
  const auto mtl_bilstm_6 = total(TaskMode::mtl, RecurrentKind::bilstm, 8);
  o.check(within(stl_lstm, 326e3, 500), "STL-LSTM " + std::to_string(stl_lstm) + " vs 326K");
  o.check(within(stl_bilstm, 436e3, 500), "STL-BiLSTM " + std::to_string(stl_bilstm) + " vs 436K");
  o.check(within(mtl_lstm_4, 829e3, 8290), "MTL-LSTM(4) " + std::to_string(mtl_lstm_4) + " vs 829K");
  o.check(within(mtl_lstm_6, 1.08e6, 10800), "MTL-LSTM(6) " + std::to_string(mtl_lstm_6) + " vs 1.08M");
  o.check(within(mtl_bilstm_4, 1.38e6, 13800), "MTL-BiLSTM(4) " + std::to_string(mtl_bilstm_4) + " vs 1.38M");
  o.check(within(mtl_bilstm_6, 1.85e6, 18500), "MTL-BiLSTM(6) " + std::to_string(mtl_bilstm_6) + " vs 1.85M");
  return o;
}

Outcome qwk_oracle() {
  Outcome o;
  Rng rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int N = 1 + static_cast<int>(uniform_index(rng, 13));
    const int lo = static_cast<int>(uniform_index(rng, 5));
    const int n = 2 + static_cast<int>(uniform_index(rng, 19));
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = lo + static_cast<int>(uniform_index(rng, N));
      b[i] = lo + static_cast<int>(uniform_index(rng, N));
    }
    const ScoreRange range{lo, lo + N - 1};
    worst = std::max(worst, std::abs(qwk(a, b, range) - brute_force_qwk(a, b, range.min, range.max)));
  }
  o.check(worst <= 1e-10, "1000 instances, max |diff| " + num(worst, 3));
  const std::vector<int> gold{0, 1, 2, 3, 2, 1, 3, 0, 2};
  const std::vector<int> constant(gold.size(), 2);
  const double k = qwk(constant, gold, {0, 3});
  o.check(k == 0.0, "constant prediction kappa " + num(k, 17));
  return o;
}

Outcome normalization_round_trip() {
  Outcome o;
  std::size_t checked = 0, bad = 0;
  for (const auto& p : all_prompts())
    for (ScoreRange r : {p.overall_range, p.trait_range})
      for (int s = r.min; s <= r.max; ++s) {
        ++checked;
        if (denormalize_score(normalize_score(s, r), r) != s) ++bad;
      }
  o.check(bad == 0, std::to_string(checked) + " scores, " + std::to_string(bad) + " mismatches");
  return o;
}

Outcome overfit_sanity() {
  Outcome o;
  // 32 essays whose overall score is a deterministic function of their token count.
  Rng rng(31);
  ModelConfig mc;
  mc.mode = TaskMode::stl;
  mc.prompt_id = 1;
  mc.hyper = reduced_hyper(16, 32, 32);
  mc.hyper.dropout = 0;
  mc.vocab_size = 40;
  mc.seed = 3;
  const ScoreRange range = prompt_spec(1).overall_range;
  std::vector<Example> data;
  for (int i = 0; i < 32; ++i) {
    Example e;
    e.essay_id = i;
    e.essay = random_essay(rng, 1, 5, 2, 8, mc.vocab_size);
    std::size_t tokens = 0;
    for (const auto& s : e.essay) tokens += s.size();
    const int score = range.min + static_cast<int>((tokens - 2) * (range.max - range.min) / 38);
    e.scores = {score};
    e.targets = {static_cast<Real>(normalize_score(score, range))};
    data.push_back(std::move(e));
  }
  TrainConfig tc;
  tc.epochs = 100;
  tc.batch_size = 4;
  tc.learning_rate = 0.003;
  tc.seed = 8;
  Model model(mc);
  const auto start = std::chrono::steady_clock::now();
  train(model, data, data, tc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto ev = evaluate(model, data);
  o.check(ev.mse[0] < 0.01, "train MSE " + num(ev.mse[0], 4));
  o.check(ev.qwk[0] > 0.95, "train QWK " + num(ev.qwk[0], 4));
  o.check(secs < 300, "runtime " + num(secs, 3) + " s");
  return o;
}

Outcome padding_equivalence() {
  Outcome o;
  Rng rng(77);
  std::vector<EncodedEssay> essays;
  for (int i = 0; i < 50; ++i) essays.push_back(random_essay(rng, 1, 7, 1, 12, 30));
  for (auto [mode, rec] : kConfigs) {
    Model model(toy_config(mode, rec, 1, 30));
    double worst = 0;
    for (std::size_t start = 0; start < essays.size(); start += 10) {
      std::vector<const EncodedEssay*> ptrs;
      for (std::size_t i = start; i < start + 10; ++i) ptrs.push_back(&essays[i]);
      Tape batched;
      Rng unused(0);
      const auto out = forward_batch(batched, model, pad_batch(ptrs), Mode::eval, unused);
      for (std::size_t i = 0; i < ptrs.size(); ++i) {
        Tape single;
        const auto ref = forward_essay(single, model, *ptrs[i], Mode::eval, unused);
        for (std::size_t k = 0; k < ref.heads.size(); ++k)
          worst = std::max(worst, std::abs(static_cast<double>(out.heads[k].value()[i] - ref.heads[k].value().item())));
      }
    }
    o.check(worst <= 1e-10, model.config().name() + " max diff " + num(worst, 3));
  }
  return o;
}

Outcome mtl_structure() {
  Outcome o;
  Model model(toy_config(TaskMode::mtl, RecurrentKind::lstm, 1, 20));
  Rng rng(4);
  const EncodedEssay essay = random_essay(rng, 2, 3, 3, 5, 20);
  Rng unused(0);
  const auto base = forward_mtl(model, essay, Mode::eval, unused);

  // Shared embedding: nudging a used row moves every head.
  Model emb = model;
  for (std::size_t j = 0; j < emb.config().hyper.embed_dim; ++j)
    emb.embedding().at(static_cast<std::size_t>(essay[0][0]), j) += Real{0.5};
  const auto e = forward_mtl(emb, essay, Mode::eval, unused);
  bool all_changed = e.overall != base.overall;
  for (std::size_t k = 0; k < base.traits.size(); ++k) all_changed = all_changed && e.traits[k] != base.traits[k];
  o.check(all_changed, "embedding perturbation changes all " + std::to_string(base.traits.size() + 1) + " heads");

  // Trait stack: only that trait and the overall score move.
  const std::size_t k = 2;
  Model trait = model;
  for (auto& v : trait.stacks()[k].conv.kernel.data()) v += Real{0.1};
  const auto t = forward_mtl(trait, essay, Mode::eval, unused);
  bool isolated = t.overall != base.overall && t.traits[k - 1] != base.traits[k - 1];
  for (std::size_t j = 0; j < base.traits.size(); ++j)
    if (j != k - 1) isolated = isolated && t.traits[j] == base.traits[j];
  o.check(isolated, "perturbing stack '" + model.heads()[k] + "' moves only that trait and overall");

  // Overall loss alone reaches trait stacks through the concatenation.
  Model grad = model;
  const auto params = grad.parameters();
  zero_grads(params);
  {
    Tape tape;
    const auto out = forward_essay(tape, grad, essay, Mode::eval, unused);
    tape.backward(layers::mse_loss(out.heads[0], tape.constant(Tensor({1, 1}, Real{1}))));
  }
  std::size_t reached = 0;
  for (std::size_t s = 1; s < grad.stacks().size(); ++s) {
    double norm = 0;
    for (Real g : std::as_const(grad.stacks()[s].conv.kernel).grad()) norm += std::abs(g);
    if (norm > 0) ++reached;
  }
  o.check(reached == grad.stacks().size() - 1,
          "overall loss reaches " + std::to_string(reached) + "/" + std::to_string(grad.stacks().size() - 1) +
              " trait stacks");
  return o;
}

ExperimentConfig small_experiment(const SyntheticFiles& files, int prompt, int epochs) {
  ExperimentConfig c;
  c.asap = files.asap_tsv;
  c.trait_files = {files.trait_dir};
  c.hyper = reduced_hyper(16, 24, 24);
  c.max_words = 200;
  c.training.epochs = epochs;
  c.training.batch_size = 10;
  c.training.learning_rate = 0.003;
  c.prompts = {prompt};
  c.folds = {0};
  return c;
}

Outcome determinism() {
  Outcome o;
  if constexpr (sizeof(Real) != 8) {
    o.detail = "skipped: 32-bit build";
    return o;
  }
  const auto dir = scratch_dir("determinism");
  SyntheticOptions so;
  so.prompts = {3};
  so.essays_per_prompt = 60;
  const auto files = write_synthetic_dataset(dir / "data", so);
  const auto config = small_experiment(files, 3, 2);
  const auto data = prepare_data(config, {3});
  const auto cell = make_cell(config, 3, TaskMode::mtl, RecurrentKind::bilstm, std::string(kOverall), 0);
  run_cell(config, data, cell, dir / "a");
  run_cell(config, data, cell, dir / "b");
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto rel = fs::path("3") / cell.config_name() / "0" / "checkpoint.bin";
  const auto a = read(dir / "a" / rel), b = read(dir / "b" / rel);
  o.check(!a.empty() && a == b, "checkpoints of two identical runs (" + std::to_string(a.size()) + " bytes) identical");
  fs::remove_all(dir);
  return o;
}

Outcome smoke_run() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto dir = scratch_dir("smoke");
  SyntheticOptions so;
  so.prompts = {1};
  so.essays_per_prompt = 150;
  const auto files = write_synthetic_dataset(dir / "data", so);
  const auto config = small_experiment(files, 1, 5);
  const auto data = prepare_data(config, {1});
  const auto cells = plan_cells(config);
  run_experiment(config, data, cells, dir / "runs", 1);

  double best_dev = 0;
  for (const auto& cell : cells) {
    std::ifstream in(cell_dir(dir / "runs", 1, cell.config_name(), 0) / "history.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string epoch, loss, dev;
      std::getline(ls, epoch, ',');
      std::getline(ls, loss, ',');
      std::getline(ls, dev, ',');
      best_dev = std::max(best_dev, std::stod(dev));
    }
  }
  o.check(cells.size() == 4, std::to_string(cells.size()) + " cells for one prompt and fold");
  o.check(best_dev > 0, "best dev overall QWK " + num(best_dev, 3));

  const auto report = assemble_report(dir / "runs");
  write_report_files(dir / "report", report);
  const auto md = render_markdown(report);
  bool table_shape = md.find("| Prompt | STL-LSTM | STL-BiLSTM | MTL-LSTM | MTL-BiLSTM |") != std::string::npos &&
                     md.find("| Mean |") != std::string::npos;
  o.check(table_shape && report.cells().size() >= 4, "holistic table with " + std::to_string(report.cells().size()) +
                                                         " report cells");

  // Equal stub timings: M+1 single-task runs against one multi-task run.
  const int M = static_cast<int>(prompt_spec(1).traits.size());
  std::vector<TimingRecord> stub{{1, "stl-lstm", 0, 7.5}, {1, "mtl-lstm", 0, 7.5}};
  for (const auto& t : prompt_spec(1).traits) stub.push_back({1, "stl-lstm." + t, 0, 7.5});
  const auto runtime = measure_runtime(stub);
  o.check(runtime.speedup.at("lstm") == M + 1, "stub speed-up " + num(runtime.speedup.at("lstm")) + " = M+1 = " +
                                                 std::to_string(M + 1));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.check(secs < 600, "runtime " + num(secs, 3) + " s");
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient integrity", gradient_integrity},
    {2, "parameter counts", parameter_counts},
    {3, "QWK oracle equivalence", qwk_oracle},
    {4, "normalization round trip", normalization_round_trip},
    {5, "overfit sanity", overfit_sanity},
    {6, "padding equivalence", padding_equivalence},
    {7, "MTL structure", mtl_structure},
    {8, "determinism", determinism},
    {9, "smoke run", smoke_run},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::stoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 64;
    }
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << " (" << std::fixed
              << std::setprecision(2) << secs << " s): " << r.detail << std::endl;
    std::cout.unsetf(std::ios::fixed);
    if (!r.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
