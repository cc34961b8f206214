#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace traitgrade {

struct ScoreRange {
  int min = 0;
  int max = 0;

  int categories() const noexcept { return max - min + 1; }
  bool contains(int s) const noexcept { return s >= min && s <= max; }
  friend bool operator==(const ScoreRange&, const ScoreRange&) = default;
};

enum class EssayType { argumentative, source_dependent, narrative };

// Per-prompt metadata of the ASAP essay sets.
struct PromptSpec {
  int prompt_id = 0;
  ScoreRange overall_range;
  ScoreRange trait_range;
  std::vector<std::string> traits;
  EssayType essay_type = EssayType::argumentative;
  std::size_t expected_essays = 0;

  bool has_trait(std::string_view trait) const;
  // Range of a head: "overall" or one of the traits.
  ScoreRange range_of(std::string_view head) const;
};

// Canonical lowercase trait names.
namespace trait {
inline constexpr std::string_view content = "content";
inline constexpr std::string_view organization = "organization";
inline constexpr std::string_view word_choice = "word choice";
inline constexpr std::string_view sentence_fluency = "sentence fluency";
inline constexpr std::string_view conventions = "conventions";
inline constexpr std::string_view prompt_adherence = "prompt adherence";
inline constexpr std::string_view language = "language";
inline constexpr std::string_view narrativity = "narrativity";
inline constexpr std::string_view style = "style";
inline constexpr std::string_view voice = "voice";
}  // namespace trait

inline constexpr std::string_view kOverall = "overall";
inline constexpr std::size_t kExpectedTotalEssays = 12978;

const PromptSpec& prompt_spec(int prompt_id);
std::span<const PromptSpec> all_prompts();

// Maps a published column header ("Word Choice", "word_choice", "PromptAdherence",
// ...) to the canonical trait name.
std::optional<std::string> canonical_trait_name(std::string_view column);

struct EssayRecord {
  std::int64_t essay_id = 0;
  int prompt_id = 0;
  std::string text;
  int overall_score = 0;
  std::map<std::string, int> trait_scores;

  int score_of(std::string_view head) const;
};

struct Dataset {
  std::map<int, std::vector<EssayRecord>> by_prompt;

  std::size_t total() const;
  const std::vector<EssayRecord>& prompt(int prompt_id) const;
};

enum class TextEncoding { utf8, latin1 };

struct LoadOptions {
  TextEncoding encoding = TextEncoding::utf8;
  // Restricts loading to these prompts when non-empty.
  std::vector<int> prompts;
};

// Reads the ASAP TSV and merges trait scores from one or more CSV files (a
// directory is expanded to the *.csv files it contains). Every problem found is
// reported at once through ValidationError.
Dataset load_dataset(const std::filesystem::path& asap_tsv,
                     std::span<const std::filesystem::path> trait_files,
                     const LoadOptions& options = {});

// Writes the consumed columns back out in the same formats.
void write_asap_tsv(const std::filesystem::path& path, std::span<const EssayRecord> records);
void write_trait_csv(const std::filesystem::path& path, const PromptSpec& prompt,
                     std::span<const EssayRecord> records);

std::string latin1_to_utf8(std::string_view bytes);

double normalize_score(int score, ScoreRange range);
// Rounds half away from zero; inputs within 1e-9 outside [0, 1] are clamped.
int denormalize_score(double y, ScoreRange range);

enum class Partition { train, dev, test };
std::string_view to_string(Partition p);
Partition parse_partition(std::string_view s);

struct FoldSplit {
  int fold_id = 0;
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> dev_ids;
  std::vector<std::int64_t> test_ids;
};

inline constexpr int kFoldCount = 5;

// Seeded shuffle, then five contiguous blocks; fold k tests on block k, validates
// on block k+1 and trains on the rest.
std::vector<FoldSplit> make_folds(std::span<const EssayRecord> records, std::uint64_t seed);

// Throws ValidationError unless the folds partition `records` as required.
void validate_folds(std::span<const FoldSplit> folds, std::span<const EssayRecord> records);

struct FoldAssignment {
  std::int64_t essay_id;
  int fold_id;
  Partition partition;
};

std::vector<FoldAssignment> read_fold_file(const std::filesystem::path& path);
void write_fold_file(const std::filesystem::path& path, std::span<const FoldSplit> folds);
// Builds the folds of one prompt from externally published assignments.
std::vector<FoldSplit> folds_from_assignments(std::span<const FoldAssignment> assignments,
                                              std::span<const EssayRecord> records);

}  // namespace traitgrade
