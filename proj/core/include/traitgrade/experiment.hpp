#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traitgrade/dataset.hpp"
#include "traitgrade/glove.hpp"
#include "traitgrade/model.hpp"
#include "traitgrade/report.hpp"
#include "traitgrade/training.hpp"

namespace traitgrade {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Everything an experiment config file can set. Defaults reproduce the published
// network and optimiser settings.
struct ExperimentConfig {
  std::filesystem::path config_path;

  // [data]
  std::filesystem::path asap;
  std::vector<std::filesystem::path> trait_files;
  TextEncoding encoding = TextEncoding::utf8;
  std::filesystem::path folds_file;
  std::uint64_t fold_seed = 42;
  std::filesystem::path glove;
  std::size_t max_words = Vocabulary::kDefaultMaxWords;

  // [model]
  Hyperparams hyper;
  std::uint64_t model_seed = 1;

  // [training]
  TrainConfig training;

  // [evaluation]
  std::vector<int> prompts{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> folds{0, 1, 2, 3, 4};
  std::vector<TaskMode> modes{TaskMode::stl, TaskMode::mtl};
  std::vector<RecurrentKind> recurrent{RecurrentKind::lstm, RecurrentKind::bilstm};
  bool stl_traits = false;
  Pairing pairing = Pairing::fold;
  std::filesystem::path runs_dir = "runs";

  // [pipeline] trait-to-holistic aggregation per prompt.
  std::map<int, Aggregation> pipeline;
};

// Parses an INI-style file with [data], [model], [training], [evaluation] and
// [pipeline] sections. Unknown sections or keys raise ConfigError naming them.
ExperimentConfig parse_experiment_config(std::istream& in);
// Relative paths in the file, runs_dir included, resolve against its directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Inclusive ranges and lists: "1-8", "1,3,5", "0-2,4".
std::vector<int> parse_int_list(std::string_view s);

// The runs directory: TRAITGRADE_RUNS when set, else `fallback`.
std::filesystem::path resolve_runs_dir(const std::filesystem::path& fallback);

// One (prompt, model configuration, fold) training run.
struct RunCell {
  int prompt = 0;
  ModelConfig model;
  int fold = 0;

  std::string config_name() const { return model.name(); }
};

struct CellFilter {
  std::optional<std::vector<int>> prompts;
  std::optional<std::vector<int>> folds;
  std::optional<TaskMode> mode;
  std::optional<RecurrentKind> recurrent;
};

std::vector<RunCell> plan_cells(const ExperimentConfig& config, const CellFilter& filter = {});
// The same cell without its ablated traits, for ablation runs.
RunCell make_cell(const ExperimentConfig& config, int prompt, TaskMode mode, RecurrentKind recurrent,
                  std::string stl_target, int fold, std::vector<std::string> ablated = {});

struct ExperimentData {
  Dataset dataset;
  std::map<int, std::vector<FoldSplit>> folds;
  std::optional<GloveTable> glove;
};

ExperimentData prepare_data(const ExperimentConfig& config, const std::vector<int>& prompts);

struct FoldData {
  std::vector<EssayRecord> train, dev, test;
};
FoldData split_fold(const std::vector<EssayRecord>& records, const FoldSplit& fold);

std::filesystem::path cell_dir(const std::filesystem::path& runs_dir, int prompt, const std::string& config, int fold);

struct CellOutcome {
  std::filesystem::path dir;
  bool skipped = false;
  std::map<std::string, double> test_qwk;
  double seconds = 0;
};

// Vocabulary of a cell's training split and its untrained model (pre-trained
// vectors loaded, ablated traits removed).
Vocabulary cell_vocabulary(const ExperimentConfig& config, const ExperimentData& data, const RunCell& cell);
Model initial_model(const ExperimentConfig& config, const ExperimentData& data, const RunCell& cell,
                    const Vocabulary& vocab);

// Trains one cell and writes checkpoint.bin, history.csv, timing.csv,
// manifest.json, test_scores.csv and predictions.csv. A finished cell is skipped.
// `initial`, when given, replaces the cell's own initial model and must have the
// same configuration.
CellOutcome run_cell(const ExperimentConfig& config, const ExperimentData& data, const RunCell& cell,
                     const std::filesystem::path& runs_dir, std::ostream* log = nullptr,
                     const Model* initial = nullptr);

// Scores holistically from the finished STL trait cells of (prompt, fold) using the
// configured aggregation.
CellOutcome run_pipeline_cell(const ExperimentConfig& config, const ExperimentData& data, int prompt,
                              RecurrentKind recurrent, int fold, const std::filesystem::path& runs_dir,
                              std::ostream* log = nullptr);

// Runs the cells on up to `jobs` worker threads, then any configured pipeline
// cells. The first error raised by a cell is rethrown after the workers stop.
std::vector<CellOutcome> run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                        const std::vector<RunCell>& cells, const std::filesystem::path& runs_dir,
                                        unsigned jobs, std::ostream* log = nullptr);

std::vector<TimingRecord> collect_timings(const std::filesystem::path& runs_dir);

}  // namespace traitgrade
