#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace traitgrade {

// Pairing unit of significance tests: per-fold QWK, or per-essay squared error.
enum class Pairing { fold, essay };

// One test-set QWK: a (prompt, config, head, fold) cell of the long-format report.
struct ReportCell {
  int prompt = 0;
  std::string config;
  std::string head;
  int fold = 0;
  double qwk = 0;

  friend bool operator==(const ReportCell&, const ReportCell&) = default;
};

struct SignificanceResult {
  double p = 1;
  double mean_difference = 0;
  std::size_t pairs = 0;
  bool significant = false;  // p < 0.05 and an improvement
};

class EvalReport {
 public:
  EvalReport() = default;
  explicit EvalReport(std::vector<ReportCell> cells) : cells_(std::move(cells)) {}

  const std::vector<ReportCell>& cells() const noexcept { return cells_; }
  std::vector<std::string>& warnings() noexcept { return warnings_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  std::vector<int> prompts() const;
  std::vector<std::string> configs() const;
  // Mean over folds of one (prompt, config, head).
  std::optional<double> fold_mean(int prompt, const std::string& config, const std::string& head) const;
  // Unweighted mean over prompts of the fold means.
  std::optional<double> prompt_mean(const std::string& config, const std::string& head) const;
  std::map<int, double> fold_values(int prompt, const std::string& config, const std::string& head) const;

  Pairing pairing() const noexcept { return pairing_; }
  // Squared errors of one (prompt, config, head) keyed by essay id, used by the
  // per-essay pairing mode.
  void set_essay_errors(int prompt, const std::string& config, const std::string& head,
                        std::map<std::int64_t, double> errors);
  void set_pairing(Pairing p) noexcept { pairing_ = p; }

  // Paired t-test of `better` against `baseline` over the folds (or essays) both have.
  std::optional<SignificanceResult> compare(int prompt, const std::string& better, const std::string& baseline,
                                            const std::string& head) const;

 private:
  std::vector<ReportCell> cells_;
  std::vector<std::string> warnings_;
  Pairing pairing_ = Pairing::fold;
  std::map<std::tuple<int, std::string, std::string>, std::map<std::int64_t, double>> essay_errors_;
};

// Reads every runs/<prompt>/<config>/<fold>/test_scores.csv below `runs_dir`
// (and predictions.csv in essay pairing mode). Prompts or configs with fewer than
// five folds produce warnings naming the gaps.
EvalReport assemble_report(const std::filesystem::path& runs_dir, Pairing pairing = Pairing::fold);

void write_report_csv(std::ostream& out, const EvalReport& report);
EvalReport read_report_csv(std::istream& in);

// Holistic-score table: one row per prompt plus the mean, one column per system.
// '*' marks an MTL system significantly better than STL-LSTM and '⋆' marks
// MTL-BiLSTM significantly better than MTL-LSTM.
std::string render_markdown(const EvalReport& report);

// Mean trait QWK per (trait, config) across prompts.
void write_traits_csv(std::ostream& out, const EvalReport& report);
std::string render_traits_svg(const EvalReport& report);

// Writes report.csv, report.md, traits.csv and traits.svg into `dir`.
void write_report_files(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace traitgrade
