#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "traitgrade/ablation.hpp"
#include "traitgrade/errors.hpp"
#include "traitgrade/experiment.hpp"
#include "traitgrade/metrics.hpp"
#include "traitgrade/report.hpp"
#include "traitgrade/synthetic.hpp"

namespace fs = std::filesystem;
using namespace traitgrade;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAbort = 2;

struct RunOptions {
  std::string config;
  std::string prompts;
  std::string folds;
  std::string mode;
  std::string recurrent;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string runs_dir;
  std::string folds_file;
  std::string glove;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool single_prompt) {
  cmd->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--prompt", o.prompts, single_prompt ? "Prompt id" : "Prompt ids, e.g. 3 or 1-8 or 1,7");
  cmd->add_option("--fold", o.folds, "Fold ids (0-4), e.g. 0 or 0-4");
  if (!single_prompt) cmd->add_option("--mode", o.mode, "Restrict to stl or mtl")->check(CLI::IsMember({"stl", "mtl"}));
  cmd->add_option("--recurrent", o.recurrent, "Restrict to lstm or bilstm")->check(CLI::IsMember({"lstm", "bilstm"}));
  cmd->add_option("--jobs", o.jobs, "Parallel run cells")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Overrides the model and training seeds");
  cmd->add_option("--runs-dir", o.runs_dir, "Run directory (default: $TRAITGRADE_RUNS, then the config)");
  cmd->add_option("--folds-file", o.folds_file, "Published fold assignments (essay_id, fold, partition)");
  cmd->add_option("--glove", o.glove, "GloVe vectors matching the embedding size");
}

ExperimentConfig resolve_config(const RunOptions& o) {
  ExperimentConfig c = load_experiment_config(o.config);
  if (o.seed) {
    c.model_seed = *o.seed;
    c.training.seed = *o.seed;
  }
  if (!o.folds_file.empty()) c.folds_file = o.folds_file;
  if (!o.glove.empty()) c.glove = o.glove;
  if (!o.runs_dir.empty()) c.runs_dir = o.runs_dir;
  else c.runs_dir = resolve_runs_dir(c.runs_dir);
  return c;
}

CellFilter make_filter(const RunOptions& o) {
  CellFilter f;
  if (!o.prompts.empty()) f.prompts = parse_int_list(o.prompts);
  if (!o.folds.empty()) {
    f.folds = parse_int_list(o.folds);
    for (int k : *f.folds)
      if (k < 0 || k >= kFoldCount) throw ConfigError("fold " + std::to_string(k) + " outside 0-4");
  }
  if (!o.mode.empty()) f.mode = parse_mode(o.mode);
  if (!o.recurrent.empty()) f.recurrent = parse_recurrent(o.recurrent);
  return f;
}

int cmd_validate(const std::string& config, const std::string& asap, const std::vector<std::string>& traits,
                 const std::string& encoding, const std::string& prompts) {
  fs::path asap_path = asap;
  std::vector<fs::path> trait_paths(traits.begin(), traits.end());
  LoadOptions opts;
  if (!config.empty()) {
    const auto c = load_experiment_config(config);
    if (asap_path.empty()) asap_path = c.asap;
    if (trait_paths.empty()) trait_paths = c.trait_files;
    opts.encoding = c.encoding;
  }
  if (asap_path.empty()) throw ConfigError("no ASAP file given (use --asap or --config)");
  if (encoding == "latin1") opts.encoding = TextEncoding::latin1;
  if (!prompts.empty()) opts.prompts = parse_int_list(prompts);
  for (const auto& p : trait_paths)
    if (!fs::exists(p)) throw ConfigError("trait file " + p.string() + " does not exist");

  const Dataset data = load_dataset(asap_path, trait_paths, opts);
  for (const auto& [p, records] : data.by_prompt) {
    const auto expected = prompt_spec(p).expected_essays;
    std::cout << "prompt " << p << ": " << records.size() << " essays";
    if (records.size() != expected) std::cout << " (full set has " << expected << ")";
    std::cout << '\n';
  }
  std::cout << data.total() << " essays, " << data.by_prompt.size() << " prompts, OK\n";
  return 0;
}

int cmd_train(const RunOptions& o) {
  const ExperimentConfig c = resolve_config(o);
  const auto cells = plan_cells(c, make_filter(o));
  if (cells.empty()) throw ConfigError("the filters select no run cells");
  std::vector<int> prompts;
  for (const auto& cell : cells)
    if (std::find(prompts.begin(), prompts.end(), cell.prompt) == prompts.end()) prompts.push_back(cell.prompt);
  const auto data = prepare_data(c, prompts);
  std::cout << cells.size() << " run cell(s) in " << c.runs_dir.string() << '\n';
  const auto outcomes = run_experiment(c, data, cells, c.runs_dir, o.jobs, &std::cout);
  std::size_t skipped = 0;
  for (const auto& out : outcomes) skipped += out.skipped;
  std::cout << outcomes.size() - skipped << " trained, " << skipped << " already complete\n";
  return 0;
}

int cmd_eval(const std::string& runs_dir_opt, const std::string& out_dir, const std::string& pairing) {
  const fs::path runs_dir = runs_dir_opt.empty() ? resolve_runs_dir("runs") : fs::path(runs_dir_opt);
  const auto report = assemble_report(runs_dir, pairing == "essay" ? Pairing::essay : Pairing::fold);
  if (report.cells().empty()) throw ConfigError("no finished runs under " + runs_dir.string());
  const fs::path out = out_dir.empty() ? runs_dir : fs::path(out_dir);
  write_report_files(out, report);
  std::cout << render_markdown(report);
  const auto runtime = measure_runtime(collect_timings(runs_dir));
  if (!runtime.seconds_by_config.empty()) {
    std::cout << "\n# Training time\n\n";
    for (const auto& [config, secs] : runtime.seconds_by_config)
      std::cout << config << ": " << std::fixed << std::setprecision(1) << secs << " s\n";
    const std::map<std::string, double> reference{{"lstm", 2.30}, {"bilstm", 3.70}};
    for (const auto& [kind, ratio] : runtime.speedup)
      std::cout << "speed-up " << kind << ": " << std::setprecision(2) << ratio << " (reference "
                << reference.at(kind) << ")\n";
  }
  if (!report.warnings().empty())
    std::cerr << "warning: " << report.warnings().size() << " partial-report gap(s), listed in report.md\n";
  std::cout << "wrote report.csv, report.md, traits.csv, traits.svg to " << out.string() << '\n';
  return 0;
}

int cmd_ablate(const RunOptions& o, const std::string& trait_arg) {
  const ExperimentConfig c = resolve_config(o);
  const auto prompts = o.prompts.empty() ? c.prompts : parse_int_list(o.prompts);
  if (prompts.size() != 1) throw ConfigError("ablate needs exactly one --prompt");
  const int prompt = prompts[0];
  const auto trait = canonical_trait_name(trait_arg);
  if (!trait || !prompt_spec(prompt).has_trait(*trait))
    throw ConfigError("prompt " + std::to_string(prompt) + " has no trait '" + trait_arg + "'");
  const auto folds = o.folds.empty() ? c.folds : make_filter(o).folds.value();
  const RecurrentKind rec = o.recurrent.empty() ? c.recurrent.front() : parse_recurrent(o.recurrent);
  const auto data = prepare_data(c, {prompt});

  auto base_cell = [&](int fold) { return make_cell(c, prompt, TaskMode::mtl, rec, std::string(kOverall), fold); };
  const BaseFactory factory = [&](int fold) {
    const auto cell = base_cell(fold);
    return initial_model(c, data, cell, cell_vocabulary(c, data, cell));
  };
  const FoldTrainer trainer = [&](Model& m, int fold) {
    const auto cell = make_cell(c, prompt, TaskMode::mtl, rec, std::string(kOverall), fold, m.config().ablated_traits);
    auto out = run_cell(c, data, cell, c.runs_dir, &std::cout, &m);
    if (out.skipped) {
      std::ifstream in(out.dir / "test_scores.csv");
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (line.rfind(std::string(kOverall) + ",", 0) == 0) return std::stod(line.substr(kOverall.size() + 1));
      throw ArgumentError("finished run " + out.dir.string() + " lacks an overall score");
    }
    return out.test_qwk.at(std::string(kOverall));
  };
  const auto r = ablate(factory, *trait, folds, trainer);
  std::cout << std::fixed << std::setprecision(4) << "prompt " << prompt << " mtl-" << to_string(rec) << " without "
            << r.trait << ": drop " << r.delta << " (base " << mean(r.base_qwk) << ", ablated " << mean(r.ablated_qwk)
            << " over " << r.folds.size() << " fold(s)); parameters " << r.base_params << " -> " << r.ablated_params;
  if (const auto ref = reference_drop(prompt, r.trait)) std::cout << "; reference drop " << *ref;
  std::cout << '\n';
  return 0;
}

int cmd_params(const std::string& mode, const std::string& recurrent, int prompt, std::size_t vocab,
               const std::string& target, const std::string& config) {
  ModelConfig mc;
  mc.mode = parse_mode(mode);
  mc.recurrent = parse_recurrent(recurrent);
  mc.prompt_id = prompt;
  mc.vocab_size = vocab;
  if (!target.empty()) {
    const auto t = target == kOverall ? std::optional<std::string>(target) : canonical_trait_name(target);
    if (!t) throw ConfigError("unknown trait '" + target + "'");
    mc.stl_target = *t;
  }
  if (!config.empty()) mc.hyper = load_experiment_config(config).hyper;
  const auto count = Model(mc).count_params();
  std::size_t width = 0;
  for (const auto& [name, _] : count.breakdown) width = std::max(width, name.size());
  for (const auto& [name, n] : count.breakdown) std::cout << std::left << std::setw(static_cast<int>(width) + 2) << name << n << '\n';
  std::ostringstream approx;
  if (count.total >= 1000000) approx << std::fixed << std::setprecision(2) << count.total / 1e6 << "M";
  else approx << std::fixed << std::setprecision(0) << count.total / 1e3 << "K";
  std::cout << std::left << std::setw(static_cast<int>(width) + 2) << "total" << count.total << " (" << approx.str()
            << ")\n";
  return 0;
}

int cmd_qwk(const std::string& file, const std::vector<int>& range, int pred_col, int gold_col) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file);
  std::vector<int> pred, gold;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    const auto need = static_cast<std::size_t>(std::max(pred_col, gold_col));
    if (fields.size() <= need) throw ConfigError(file + ":" + std::to_string(lineno) + ": too few columns");
    try {
      std::size_t used_p = 0, used_g = 0;
      const int p = std::stoi(fields[static_cast<std::size_t>(pred_col)], &used_p);
      const int g = std::stoi(fields[static_cast<std::size_t>(gold_col)], &used_g);
      pred.push_back(p);
      gold.push_back(g);
    } catch (const std::logic_error&) {
      if (lineno == 1) continue;  // header
      throw ConfigError(file + ":" + std::to_string(lineno) + ": non-integer score");
    }
  }
  std::cout << std::fixed << std::setprecision(6) << qwk(pred, gold, {range[0], range[1]}) << '\n';
  return 0;
}

int cmd_synth(const std::string& out, const std::string& prompts, std::size_t essays, std::uint64_t seed) {
  SyntheticOptions o;
  o.prompts = parse_int_list(prompts);
  for (int p : o.prompts) prompt_spec(p);
  o.essays_per_prompt = essays;
  o.seed = seed;
  const auto files = write_synthetic_dataset(out, o);
  std::cout << "wrote " << files.asap_tsv.string() << " and " << files.trait_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural essay grading: single- and multi-task CNN-LSTM scorers with evaluation tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  auto* validate = app.add_subcommand("validate", "Check the ASAP and trait files and count essays per prompt");
  std::string v_config, v_asap, v_encoding = "utf8", v_prompts;
  std::vector<std::string> v_traits;
  validate->add_option("--config", v_config, "Experiment config supplying the data paths")->check(CLI::ExistingFile);
  validate->add_option("--asap", v_asap, "ASAP training_set_rel3.tsv");
  validate->add_option("--traits", v_traits, "Trait score CSV files or directories");
  validate->add_option("--encoding", v_encoding, "Text encoding of the ASAP file")->check(CLI::IsMember({"utf8", "latin1"}));
  validate->add_option("--prompt", v_prompts, "Only these prompts");

  RunOptions train_opts;
  auto* train = app.add_subcommand("train", "Train the configured grid of run cells (resumable)");
  add_run_options(train, train_opts, false);

  auto* eval = app.add_subcommand("eval", "Assemble finished runs into report.csv, report.md and trait summaries");
  std::string e_runs, e_out, e_pairing = "fold";
  eval->add_option("--runs-dir", e_runs, "Run directory (default: $TRAITGRADE_RUNS, then ./runs)");
  eval->add_option("--out", e_out, "Report directory (default: the run directory)");
  eval->add_option("--pairing", e_pairing, "Significance pairing unit")->check(CLI::IsMember({"fold", "essay"}));

  RunOptions ablate_opts;
  std::string a_trait;
  auto* ablate_cmd = app.add_subcommand("ablate", "Retrain MTL without one trait and report the drop in QWK");
  add_run_options(ablate_cmd, ablate_opts, true);
  ablate_cmd->add_option("--trait", a_trait, "Trait to remove")->required();

  auto* params = app.add_subcommand("params", "Count trainable parameters with a per-layer breakdown");
  std::string p_mode = "stl", p_rec = "lstm", p_target, p_config;
  int p_prompt = 1;
  std::size_t p_vocab = Vocabulary::kDefaultMaxWords + 2;
  params->add_option("--mode", p_mode, "stl or mtl")->check(CLI::IsMember({"stl", "mtl"}));
  params->add_option("--recurrent", p_rec, "lstm or bilstm")->check(CLI::IsMember({"lstm", "bilstm"}));
  params->add_option("--prompt", p_prompt, "Prompt id")->check(CLI::Range(1, 8));
  params->add_option("--vocab", p_vocab, "Vocabulary size including <pad> and <unk>")->check(CLI::Range(3, 10000000));
  params->add_option("--target", p_target, "STL target: overall or a trait");
  params->add_option("--config", p_config, "Take layer sizes from this config")->check(CLI::ExistingFile);

  auto* qwk_cmd = app.add_subcommand("qwk", "Quadratic weighted kappa of two integer columns of a CSV");
  std::string q_file;
  std::vector<int> q_range;
  int q_pred = 0, q_gold = 1;
  qwk_cmd->add_option("file", q_file, "CSV file")->required()->check(CLI::ExistingFile);
  qwk_cmd->add_option("--range", q_range, "Score range MIN MAX")->required()->expected(2);
  qwk_cmd->add_option("--pred-col", q_pred, "Zero-based prediction column")->check(CLI::NonNegativeNumber);
  qwk_cmd->add_option("--gold-col", q_gold, "Zero-based gold column")->check(CLI::NonNegativeNumber);

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in the ASAP formats");
  std::string s_out, s_prompts = "1";
  std::size_t s_essays = 200;
  std::uint64_t s_seed = 7;
  synth->add_option("--out", s_out, "Output directory")->required();
  synth->add_option("--prompt", s_prompts, "Prompt ids");
  synth->add_option("--essays", s_essays, "Essays per prompt")->check(CLI::PositiveNumber);
  synth->add_option("--seed", s_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*validate) return cmd_validate(v_config, v_asap, v_traits, v_encoding, v_prompts);
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_eval(e_runs, e_out, e_pairing);
    if (*ablate_cmd) return cmd_ablate(ablate_opts, a_trait);
    if (*params) return cmd_params(p_mode, p_rec, p_prompt, p_vocab, p_target, p_config);
    if (*qwk_cmd) return cmd_qwk(q_file, q_range, q_pred, q_gold);
    if (*synth) return cmd_synth(s_out, s_prompts, s_essays, s_seed);
  } catch (const ValidationError& e) {
    std::cerr << "validation failed with " << e.issues().size() << " problem(s):\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << '\n';
    return kExitConfig;
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: training aborted: " << e.what() << '\n';
    return kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
