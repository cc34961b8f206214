#include "traitgrade/experiment.hpp"

#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "traitgrade/checkpoint.hpp"
#include "traitgrade/errors.hpp"
#include "traitgrade/metrics.hpp"

namespace traitgrade {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw ConfigError("invalid value '" + value + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
  if (value == "false" || value == "no" || value == "0" || value == "off") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

// Applies one key of a section. Returns false when the key is unknown.
bool apply_key(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  if (section == "data") {
    if (key == "asap") c.asap = value;
    else if (key == "traits") {
      c.trait_files.clear();
      for (auto& p : split_list(value)) c.trait_files.emplace_back(p);
    } else if (key == "encoding") {
      if (value == "utf8" || value == "utf-8") c.encoding = TextEncoding::utf8;
      else if (value == "latin1" || value == "latin-1") c.encoding = TextEncoding::latin1;
      else throw ConfigError("invalid value '" + value + "' for " + full + " (expected utf8 or latin1)");
    } else if (key == "folds_file") c.folds_file = value;
    else if (key == "fold_seed") c.fold_seed = parse_number<std::uint64_t>(full, value);
    else if (key == "glove") c.glove = value;
    else if (key == "max_words") c.max_words = parse_number<std::size_t>(full, value);
    else return false;
  } else if (section == "model") {
    if (key == "embed_dim") c.hyper.embed_dim = parse_number<std::size_t>(full, value);
    else if (key == "window") c.hyper.window = parse_number<std::size_t>(full, value);
    else if (key == "filters") c.hyper.filters = parse_number<std::size_t>(full, value);
    else if (key == "hidden") c.hyper.hidden = parse_number<std::size_t>(full, value);
    else if (key == "dropout") c.hyper.dropout = parse_number<double>(full, value);
    else if (key == "dropout_sentences") c.hyper.dropout_sentences = parse_bool(full, value);
    else if (key == "dropout_essay") c.hyper.dropout_essay = parse_bool(full, value);
    else if (key == "seed") c.model_seed = parse_number<std::uint64_t>(full, value);
    else return false;
  } else if (section == "training") {
    TrainConfig& t = c.training;
    if (key == "epochs") t.epochs = parse_number<int>(full, value);
    else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(full, value);
    else if (key == "learning_rate") t.learning_rate = parse_number<double>(full, value);
    else if (key == "rms_decay") t.rms_decay = parse_number<double>(full, value);
    else if (key == "epsilon") t.epsilon = parse_number<double>(full, value);
    else if (key == "optimizer") t.optimizer = parse_optimizer(value);
    else if (key == "momentum") t.momentum = parse_number<double>(full, value);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(full, value);
    else if (key == "selection") t.selection = parse_selection(value);
    else return false;
  } else if (section == "evaluation") {
    if (key == "prompts") c.prompts = parse_int_list(value);
    else if (key == "folds") c.folds = parse_int_list(value);
    else if (key == "modes") {
      c.modes.clear();
      for (const auto& m : split_list(value)) c.modes.push_back(parse_mode(m));
    } else if (key == "recurrent") {
      c.recurrent.clear();
      for (const auto& r : split_list(value)) c.recurrent.push_back(parse_recurrent(r));
    } else if (key == "stl_traits") c.stl_traits = parse_bool(full, value);
    else if (key == "pairing") {
      if (value == "fold") c.pairing = Pairing::fold;
      else if (value == "essay") c.pairing = Pairing::essay;
      else throw ConfigError("invalid value '" + value + "' for " + full + " (expected fold or essay)");
    } else if (key == "runs_dir") c.runs_dir = value;
    else return false;
  } else if (section == "pipeline") {
    if (key.rfind("prompt", 0) != 0) return false;
    const auto ids = parse_int_list(key.substr(6));
    if (ids.size() != 1) return false;
    prompt_spec(ids[0]);
    c.pipeline[ids[0]] = Aggregation::parse(value);
  } else {
    return false;
  }
  return true;
}

void validate_experiment(const ExperimentConfig& c) {
  c.training.validate();
  for (int p : c.prompts) prompt_spec(p);
  for (int f : c.folds)
    if (f < 0 || f >= kFoldCount) throw ConfigError("fold " + std::to_string(f) + " outside 0-4");
  for (const auto& [p, agg] : c.pipeline)
    for (const auto& [trait, _] : agg.coefficients)
      if (!prompt_spec(p).has_trait(trait))
        throw ConfigError("aggregation for prompt " + std::to_string(p) + " references unknown trait '" + trait + "'");
  if (c.max_words < 1) throw ConfigError("data.max_words must be positive");
}

std::uint64_t mix_seed(std::uint64_t seed, int prompt, int fold) {
  Rng r = derive_rng(seed, static_cast<std::uint64_t>(prompt) * 1000 + static_cast<std::uint64_t>(fold));
  return r();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

nlohmann::ordered_json training_json(const TrainConfig& t) {
  nlohmann::ordered_json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["rms_decay"] = t.rms_decay;
  j["epsilon"] = t.epsilon;
  j["optimizer"] = to_string(t.optimizer);
  j["momentum"] = t.momentum;
  j["seed"] = t.seed;
  j["selection"] = to_string(t.selection);
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

const char* kDone = "DONE";

class LogSink {
 public:
  explicit LogSink(std::ostream* out) : out_(out) {}
  void line(const std::string& s) {
    if (!out_) return;
    std::lock_guard lock(mutex_);
    *out_ << s << '\n' << std::flush;
  }

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

}  // namespace

std::vector<int> parse_int_list(std::string_view s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      const auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        std::size_t used = 0;
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
        continue;
      }
      const int a = std::stoi(item.substr(0, dash));
      const int b = std::stoi(item.substr(dash + 1));
      if (b < a) throw ConfigError("empty range '" + item + "'");
      for (int v = a; v <= b; ++v) out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid integer list item '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty integer list '" + std::string(s) + "'");
  return out;
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("unknown config key '" + section + "' outside a section");
    static const std::set<std::string> sections{"data", "model", "training", "evaluation", "pipeline"};
    if (!sections.count(section)) throw ConfigError("unknown config section '" + section + "'");
    for (const auto& [key, node] : body) {
      if (!apply_key(c, section, key, trim(node.data())))
        throw ConfigError("unknown config key '" + section + "." + key + "'");
    }
  }
  validate_experiment(c);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ExperimentConfig c = parse_experiment_config(in);
  c.config_path = path;
  const auto base = path.parent_path();
  auto rebase = [&base](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  rebase(c.asap);
  for (auto& p : c.trait_files) rebase(p);
  rebase(c.folds_file);
  rebase(c.glove);
  rebase(c.runs_dir);
  return c;
}

fs::path resolve_runs_dir(const fs::path& fallback) {
  if (const char* env = std::getenv("TRAITGRADE_RUNS"); env && *env) return env;
  return fallback;
}

RunCell make_cell(const ExperimentConfig& config, int prompt, TaskMode mode, RecurrentKind recurrent,
                  std::string stl_target, int fold, std::vector<std::string> ablated) {
  RunCell cell;
  cell.prompt = prompt;
  cell.fold = fold;
  cell.model.recurrent = recurrent;
  cell.model.mode = mode;
  cell.model.stl_target = std::move(stl_target);
  cell.model.prompt_id = prompt;
  cell.model.hyper = config.hyper;
  cell.model.vocab_size = config.max_words + 2;
  cell.model.seed = mix_seed(config.model_seed, prompt, fold);
  cell.model.ablated_traits = std::move(ablated);
  cell.model.validate();
  return cell;
}

std::vector<RunCell> plan_cells(const ExperimentConfig& config, const CellFilter& filter) {
  const auto prompts = filter.prompts.value_or(config.prompts);
  const auto folds = filter.folds.value_or(config.folds);
  std::vector<RunCell> cells;
  for (int p : prompts) {
    const PromptSpec& spec = prompt_spec(p);
    const bool trait_runs = config.stl_traits || config.pipeline.count(p) > 0;
    for (auto rec : config.recurrent) {
      if (filter.recurrent && *filter.recurrent != rec) continue;
      for (auto mode : config.modes) {
        if (filter.mode && *filter.mode != mode) continue;
        for (int f : folds) {
          if (mode == TaskMode::mtl) {
            cells.push_back(make_cell(config, p, mode, rec, std::string(kOverall), f));
            continue;
          }
          cells.push_back(make_cell(config, p, mode, rec, std::string(kOverall), f));
          if (trait_runs)
            for (const auto& t : spec.traits) cells.push_back(make_cell(config, p, mode, rec, t, f));
        }
      }
    }
  }
  return cells;
}

ExperimentData prepare_data(const ExperimentConfig& config, const std::vector<int>& prompts) {
  if (config.asap.empty()) throw ConfigError("data.asap is not set");
  ExperimentData data;
  LoadOptions opts;
  opts.encoding = config.encoding;
  opts.prompts = prompts;
  data.dataset = load_dataset(config.asap, config.trait_files, opts);
  std::vector<FoldAssignment> assignments;
  if (!config.folds_file.empty()) assignments = read_fold_file(config.folds_file);
  for (int p : prompts) {
    const auto& records = data.dataset.prompt(p);
    auto folds = config.folds_file.empty() ? make_folds(records, config.fold_seed)
                                           : folds_from_assignments(assignments, records);
    validate_folds(folds, records);
    data.folds[p] = std::move(folds);
  }
  if (!config.glove.empty()) data.glove = read_glove(config.glove, config.hyper.embed_dim);
  return data;
}

FoldData split_fold(const std::vector<EssayRecord>& records, const FoldSplit& fold) {
  std::map<std::int64_t, const EssayRecord*> by_id;
  for (const auto& r : records) by_id[r.essay_id] = &r;
  auto gather = [&by_id](const std::vector<std::int64_t>& ids) {
    std::vector<EssayRecord> out;
    out.reserve(ids.size());
    for (auto id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ArgumentError("fold references unknown essay " + std::to_string(id));
      out.push_back(*it->second);
    }
    return out;
  };
  return {gather(fold.train_ids), gather(fold.dev_ids), gather(fold.test_ids)};
}

fs::path cell_dir(const fs::path& runs_dir, int prompt, const std::string& config, int fold) {
  return runs_dir / std::to_string(prompt) / config / std::to_string(fold);
}

Vocabulary cell_vocabulary(const ExperimentConfig& config, const ExperimentData& data, const RunCell& cell) {
  auto folds_it = data.folds.find(cell.prompt);
  if (folds_it == data.folds.end()) throw ArgumentError("no folds prepared for prompt " + std::to_string(cell.prompt));
  const auto split = split_fold(data.dataset.prompt(cell.prompt), folds_it->second.at(static_cast<std::size_t>(cell.fold)));
  return build_vocab(split.train, config.max_words);
}

Model initial_model(const ExperimentConfig&, const ExperimentData& data, const RunCell& cell, const Vocabulary& vocab) {
  ModelConfig base_cfg = cell.model;
  base_cfg.vocab_size = vocab.size();
  base_cfg.ablated_traits.clear();
  Model model(base_cfg);
  if (data.glove) model.load_pretrained(*data.glove, vocab);
  for (const auto& t : cell.model.ablated_traits) model = ablate_model(model, t);
  return model;
}

CellOutcome run_cell(const ExperimentConfig& config, const ExperimentData& data, const RunCell& cell,
                     const fs::path& runs_dir, std::ostream* log, const Model* initial) {
  CellOutcome outcome;
  outcome.dir = cell_dir(runs_dir, cell.prompt, cell.config_name(), cell.fold);
  const std::string label =
      "prompt " + std::to_string(cell.prompt) + " " + cell.config_name() + " fold " + std::to_string(cell.fold);
  if (fs::exists(outcome.dir / kDone)) {
    outcome.skipped = true;
    if (log) *log << "skip " << label << " (already complete)\n";
    return outcome;
  }
  auto folds_it = data.folds.find(cell.prompt);
  if (folds_it == data.folds.end()) throw ArgumentError("no folds prepared for prompt " + std::to_string(cell.prompt));
  const FoldData split = split_fold(data.dataset.prompt(cell.prompt), folds_it->second.at(static_cast<std::size_t>(cell.fold)));
  const Vocabulary vocab = build_vocab(split.train, config.max_words);
  Model model = initial ? *initial : initial_model(config, data, cell, vocab);
  {
    ModelConfig expected = cell.model;
    expected.vocab_size = vocab.size();
    if (!(model.config() == expected))
      throw ArgumentError("initial model does not match run " + cell.config_name());
  }

  const auto train_set = make_examples(split.train, vocab, model.config());
  const auto dev_set = make_examples(split.dev, vocab, model.config());
  const auto test_set = make_examples(split.test, vocab, model.config());

  TrainConfig tc = config.training;
  tc.seed = mix_seed(config.training.seed, cell.prompt, cell.fold);

  fs::create_directories(outcome.dir);
  std::ofstream history(outcome.dir / "history.csv", std::ios::trunc);
  history << "epoch,train_loss";
  for (const auto& h : model.heads()) history << ",dev_qwk_" << h;
  history << ",seconds\n" << std::setprecision(10);
  TrainHooks hooks;
  hooks.on_epoch = [&history](const EpochRecord& r) {
    history << r.epoch << ',' << r.train_loss;
    for (double q : r.dev_qwk) history << ',' << q;
    history << ',' << r.seconds << '\n';
  };
  if (log) *log << "train " << label << ": " << train_set.size() << "/" << dev_set.size() << "/" << test_set.size()
                << " essays, " << model.count_params().total << " parameters\n";
  const TrainResult result = train(model, train_set, dev_set, tc, hooks);
  history.close();

  const HeadEvaluation test = evaluate(model, test_set, tc.batch_size);
  std::ostringstream scores, preds;
  scores << "head,qwk\n" << std::setprecision(17);
  preds << "essay_id,head,gold,pred\n";
  for (std::size_t k = 0; k < model.heads().size(); ++k) {
    scores << model.heads()[k] << ',' << test.qwk[k] << '\n';
    outcome.test_qwk[model.heads()[k]] = test.qwk[k];
    for (std::size_t i = 0; i < test_set.size(); ++i)
      preds << test_set[i].essay_id << ',' << model.heads()[k] << ',' << test_set[i].scores[k] << ','
            << test.predictions[k][i] << '\n';
  }
  write_text(outcome.dir / "test_scores.csv", scores.str());
  write_text(outcome.dir / "predictions.csv", preds.str());

  std::ostringstream timing;
  timing << "prompt,config,fold,seconds,epochs,best_epoch\n"
         << cell.prompt << ',' << cell.config_name() << ',' << cell.fold << ',' << std::setprecision(10)
         << result.seconds << ',' << tc.epochs << ',' << result.best_epoch << '\n';
  write_text(outcome.dir / "timing.csv", timing.str());

  nlohmann::ordered_json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["timestamp"] = timestamp();
  manifest["config_file"] = config.config_path.string();
  manifest["optimizer_note"] =
      "rms_decay is the squared-gradient decay of RMSProp (the 0.9 'momentum' setting); momentum applies only to "
      "rmsprop_momentum";
  manifest["prompt"] = cell.prompt;
  manifest["fold"] = cell.fold;
  manifest["config"] = cell.config_name();
  manifest["model"] = nlohmann::json::parse(config_to_json(model.config()));
  manifest["training"] = training_json(tc);
  manifest["data"] = {{"asap", config.asap.string()},
                      {"folds_file", config.folds_file.string()},
                      {"fold_seed", config.fold_seed},
                      {"glove", config.glove.string()},
                      {"max_words", config.max_words}};
  std::vector<std::string> traits;
  for (const auto& p : config.trait_files) traits.push_back(p.string());
  manifest["data"]["traits"] = traits;
  manifest["essays"] = {{"train", train_set.size()}, {"dev", dev_set.size()}, {"test", test_set.size()}};
  manifest["best_epoch"] = result.best_epoch;
  write_text(outcome.dir / "manifest.json", manifest.dump(2) + "\n");

  save_checkpoint(outcome.dir / "checkpoint.bin", model, vocab);
  write_text(outcome.dir / kDone, "");
  outcome.seconds = result.seconds;
  if (log) {
    std::ostringstream o;
    o << "done " << label << " in " << std::fixed << std::setprecision(1) << result.seconds << " s, best epoch "
      << result.best_epoch << ", test QWK";
    for (const auto& [h, q] : outcome.test_qwk) o << ' ' << h << '=' << std::setprecision(3) << q;
    *log << o.str() << '\n';
  }
  return outcome;
}

CellOutcome run_pipeline_cell(const ExperimentConfig& config, const ExperimentData& data, int prompt,
                              RecurrentKind recurrent, int fold, const fs::path& runs_dir, std::ostream* log) {
  auto agg_it = config.pipeline.find(prompt);
  if (agg_it == config.pipeline.end())
    throw ConfigError("no pipeline aggregation configured for prompt " + std::to_string(prompt));
  const Aggregation& agg = agg_it->second;
  const PromptSpec& spec = prompt_spec(prompt);
  const std::string name = "pipeline-" + std::string(to_string(recurrent));
  CellOutcome outcome;
  outcome.dir = cell_dir(runs_dir, prompt, name, fold);
  if (fs::exists(outcome.dir / kDone)) {
    outcome.skipped = true;
    return outcome;
  }

  std::map<std::int64_t, std::map<std::string, int>> trait_preds;
  for (const auto& [trait, _] : agg.coefficients) {
    const auto cfg = make_cell(config, prompt, TaskMode::stl, recurrent, trait, fold).config_name();
    const auto dir = cell_dir(runs_dir, prompt, cfg, fold);
    std::ifstream in(dir / "predictions.csv");
    if (!in || !fs::exists(dir / kDone))
      throw ArgumentError("pipeline needs the finished run " + dir.string());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string id, head, gold, pred;
      std::getline(ls, id, ',');
      std::getline(ls, head, ',');
      std::getline(ls, gold, ',');
      std::getline(ls, pred, ',');
      trait_preds[std::stoll(id)][head] = std::stoi(pred);
    }
  }

  const auto split = split_fold(data.dataset.prompt(prompt), data.folds.at(prompt).at(static_cast<std::size_t>(fold)));
  std::vector<int> pred, gold;
  std::ostringstream preds;
  preds << "essay_id,head,gold,pred\n";
  for (const auto& r : split.test) {
    auto it = trait_preds.find(r.essay_id);
    if (it == trait_preds.end()) throw ArgumentError("no trait predictions for essay " + std::to_string(r.essay_id));
    pred.push_back(pipeline_holistic(it->second, agg, spec.overall_range));
    gold.push_back(r.overall_score);
    preds << r.essay_id << ',' << kOverall << ',' << gold.back() << ',' << pred.back() << '\n';
  }
  const double q = qwk(pred, gold, spec.overall_range);
  outcome.test_qwk[std::string(kOverall)] = q;
  fs::create_directories(outcome.dir);
  std::ostringstream scores;
  scores << "head,qwk\n" << kOverall << ',' << std::setprecision(17) << q << '\n';
  write_text(outcome.dir / "test_scores.csv", scores.str());
  write_text(outcome.dir / "predictions.csv", preds.str());
  write_text(outcome.dir / kDone, "");
  if (log)
    *log << "done prompt " << prompt << ' ' << name << " fold " << fold << ", test QWK overall=" << std::fixed
         << std::setprecision(3) << q << std::defaultfloat << '\n';
  return outcome;
}

std::vector<CellOutcome> run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                        const std::vector<RunCell>& cells, const fs::path& runs_dir, unsigned jobs,
                                        std::ostream* log) {
  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  LogSink sink(log);

  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= cells.size()) return;
      try {
        std::ostringstream cell_log;
        outcomes[i] = run_cell(config, data, cells[i], runs_dir, log ? &cell_log : nullptr);
        const auto text = cell_log.str();
        if (!text.empty()) sink.line(text.substr(0, text.size() - 1));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::set<std::tuple<int, RecurrentKind, int>> pipelines;
  for (const auto& c : cells)
    if (c.model.mode == TaskMode::stl && config.pipeline.count(c.prompt))
      pipelines.insert({c.prompt, c.model.recurrent, c.fold});
  for (const auto& [p, rec, f] : pipelines) outcomes.push_back(run_pipeline_cell(config, data, p, rec, f, runs_dir, log));
  return outcomes;
}

std::vector<TimingRecord> collect_timings(const fs::path& runs_dir) {
  std::vector<TimingRecord> out;
  if (!fs::is_directory(runs_dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
    if (e.path().filename() != "timing.csv") continue;
    std::ifstream in(e.path());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string prompt, config, fold, seconds;
      std::getline(ls, prompt, ',');
      std::getline(ls, config, ',');
      std::getline(ls, fold, ',');
      std::getline(ls, seconds, ',');
      if (seconds.empty()) continue;
      out.push_back({std::stoi(prompt), config, std::stoi(fold), std::stod(seconds)});
    }
  }
  std::sort(out.begin(), out.end(), [](const TimingRecord& a, const TimingRecord& b) {
    return std::tie(a.prompt, a.config, a.fold) < std::tie(b.prompt, b.config, b.fold);
  });
  return out;
}

}  // namespace traitgrade
