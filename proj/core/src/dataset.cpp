#include "traitgrade/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "traitgrade/errors.hpp"
#include "traitgrade/rng.hpp"

namespace traitgrade {

namespace {

using namespace std::string_literals;

std::vector<std::string> traits_of(std::initializer_list<std::string_view> names) {
  return {names.begin(), names.end()};
}

const std::array<PromptSpec, 8>& prompt_table() {
  static const std::array<PromptSpec, 8> table = [] {
    const auto argumentative = traits_of({trait::content, trait::organization, trait::word_choice,
                                          trait::sentence_fluency, trait::conventions});
    const auto source = traits_of(
        {trait::content, trait::prompt_adherence, trait::language, trait::narrativity});
    return std::array<PromptSpec, 8>{{
        {1, {2, 12}, {1, 6}, argumentative, EssayType::argumentative, 1783},
        {2, {1, 6}, {1, 6}, argumentative, EssayType::argumentative, 1800},
        {3, {0, 3}, {0, 3}, source, EssayType::source_dependent, 1726},
        {4, {0, 3}, {0, 3}, source, EssayType::source_dependent, 1772},
        {5, {0, 4}, {0, 4}, source, EssayType::source_dependent, 1805},
        {6, {0, 4}, {0, 4}, source, EssayType::source_dependent, 1800},
        {7, {0, 30}, {0, 6},
         traits_of({trait::content, trait::organization, trait::style, trait::conventions}),
         EssayType::narrative, 1569},
        {8, {0, 60}, {0, 12},
         traits_of({trait::content, trait::organization, trait::voice, trait::word_choice,
                    trait::sentence_fluency, trait::conventions}),
         EssayType::narrative, 723},
    }};
  }();
  return table;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Strips one level of surrounding double quotes and un-doubles embedded quotes.
std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s[i];
      if (s[i] == '"' && i + 1 < s.size() && s[i + 1] == '"') ++i;
    }
    return out;
  }
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec == std::errc() && ptr == t.data() + t.size()) return value;
  // Scores are sometimes exported as "3.0".
  double d{};
  auto [p2, e2] = std::from_chars(t.data(), t.data() + t.size(), d);
  if (e2 == std::errc() && p2 == t.data() + t.size() && std::floor(d) == d) return static_cast<T>(d);
  return std::nullopt;
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::vector<std::filesystem::path> expand_trait_files(std::span<const std::filesystem::path> paths) {
  std::vector<std::filesystem::path> out;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".csv") found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

struct TraitRow {
  std::map<std::string, std::optional<int>> scores;
  std::string source;
};

}  // namespace

bool PromptSpec::has_trait(std::string_view t) const {
  return std::find(traits.begin(), traits.end(), t) != traits.end();
}

ScoreRange PromptSpec::range_of(std::string_view head) const {
  if (head == kOverall) return overall_range;
  if (has_trait(head)) return trait_range;
  throw ConfigError("prompt " + std::to_string(prompt_id) + " has no trait '" + std::string(head) + "'");
}

const PromptSpec& prompt_spec(int prompt_id) {
  if (prompt_id < 1 || prompt_id > 8)
    throw ArgumentError("unknown prompt " + std::to_string(prompt_id) + " (expected 1-8)");
  return prompt_table()[static_cast<std::size_t>(prompt_id - 1)];
}

std::span<const PromptSpec> all_prompts() { return prompt_table(); }

std::optional<std::string> canonical_trait_name(std::string_view column) {
  std::string key;
  for (char c : column) {
    if (std::isalnum(static_cast<unsigned char>(c))) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  static const std::unordered_map<std::string, std::string_view> aliases = {
      {"content", trait::content},
      {"cont", trait::content},
      {"organization", trait::organization},
      {"organisation", trait::organization},
      {"org", trait::organization},
      {"wordchoice", trait::word_choice},
      {"wc", trait::word_choice},
      {"sentencefluency", trait::sentence_fluency},
      {"sf", trait::sentence_fluency},
      {"conventions", trait::conventions},
      {"conv", trait::conventions},
      {"promptadherence", trait::prompt_adherence},
      {"pa", trait::prompt_adherence},
      {"language", trait::language},
      {"lang", trait::language},
      {"narrativity", trait::narrativity},
      {"nar", trait::narrativity},
      {"style", trait::style},
      {"voice", trait::voice},
  };
  if (auto it = aliases.find(key); it != aliases.end()) return std::string(it->second);
  return std::nullopt;
}

int EssayRecord::score_of(std::string_view head) const {
  if (head == kOverall) return overall_score;
  auto it = trait_scores.find(std::string(head));
  if (it == trait_scores.end())
    throw ArgumentError("essay " + std::to_string(essay_id) + " has no score for '" + std::string(head) + "'");
  return it->second;
}

std::size_t Dataset::total() const {
  std::size_t n = 0;
  for (const auto& [_, records] : by_prompt) n += records.size();
  return n;
}

const std::vector<EssayRecord>& Dataset::prompt(int prompt_id) const {
  auto it = by_prompt.find(prompt_id);
  if (it == by_prompt.end()) throw ArgumentError("dataset has no essays for prompt " + std::to_string(prompt_id));
  return it->second;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (unsigned char c : bytes) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& asap_tsv,
                     std::span<const std::filesystem::path> trait_files, const LoadOptions& options) {
  std::vector<std::string> issues;

  std::ifstream tsv(asap_tsv, std::ios::binary);
  if (!tsv) throw ValidationError({"cannot open ASAP file " + asap_tsv.string()});
  if (trait_files.empty()) throw ValidationError({"no trait score file given"});

  // Trait scores by essay id.
  std::unordered_map<std::int64_t, TraitRow> trait_rows;
  for (const auto& path : expand_trait_files(trait_files)) {
    std::ifstream csv(path, std::ios::binary);
    if (!csv) {
      issues.push_back("cannot open trait file " + path.string());
      continue;
    }
    std::string line;
    if (!getline_stripped(csv, line)) {
      issues.push_back("trait file " + path.string() + " is empty");
      continue;
    }
    const auto header = split(line, ',');
    std::optional<std::size_t> id_col;
    std::vector<std::pair<std::size_t, std::string>> trait_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string name = lower(trim(unquote(trim(header[i]))));
      if (name == "essay_id" || name == "essayid" || name == "id" || name == "essay id") {
        id_col = i;
      } else if (auto t = canonical_trait_name(name)) {
        trait_cols.emplace_back(i, *t);
      }
    }
    if (!id_col) {
      issues.push_back("trait file " + path.string() + " has no essay_id column");
      continue;
    }
    std::size_t line_no = 1;
    while (getline_stripped(csv, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cells = split(line, ',');
      const auto id = cells.size() > *id_col ? parse_number<std::int64_t>(unquote(cells[*id_col])) : std::nullopt;
      if (!id) {
        issues.push_back(path.string() + ":" + std::to_string(line_no) + ": unreadable essay_id");
        continue;
      }
      auto [it, inserted] = trait_rows.try_emplace(*id);
      if (!inserted && it->second.source != path.string()) {
        // The same essay may be split over files by trait; merge non-empty cells.
      } else if (!inserted) {
        issues.push_back("essay " + std::to_string(*id) + ": duplicate row in " + path.string());
        continue;
      }
      it->second.source = path.string();
      for (const auto& [col, name] : trait_cols) {
        if (col >= cells.size()) continue;
        const std::string cell = trim(unquote(cells[col]));
        if (cell.empty()) continue;
        auto value = parse_number<int>(cell);
        if (!value) {
          issues.push_back("essay " + std::to_string(*id) + ": unreadable " + name + " score '" + cell + "'");
          continue;
        }
        it->second.scores[name] = value;
      }
    }
  }

  std::string line;
  if (!getline_stripped(tsv, line)) throw ValidationError({"ASAP file " + asap_tsv.string() + " is empty"});
  const auto header = split(line, '\t');
  std::optional<std::size_t> c_id, c_set, c_essay, c_score;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = lower(trim(unquote(header[i])));
    if (name == "essay_id") c_id = i;
    if (name == "essay_set") c_set = i;
    if (name == "essay") c_essay = i;
    if (name == "domain1_score") c_score = i;
  }
  if (!c_id || !c_set || !c_essay || !c_score)
    throw ValidationError({"ASAP file " + asap_tsv.string() +
                           " must have essay_id, essay_set, essay and domain1_score columns"});

  Dataset data;
  std::set<std::int64_t> seen;
  std::size_t line_no = 1;
  while (getline_stripped(tsv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (options.encoding == TextEncoding::latin1) line = latin1_to_utf8(line);
    const auto cells = split(line, '\t');
    const std::string where = asap_tsv.filename().string() + ":" + std::to_string(line_no);
    const std::size_t needed = std::max({*c_id, *c_set, *c_essay, *c_score});
    if (cells.size() <= needed) {
      issues.push_back(where + ": expected at least " + std::to_string(needed + 1) + " columns");
      continue;
    }
    const auto id = parse_number<std::int64_t>(unquote(cells[*c_id]));
    const auto set = parse_number<int>(unquote(cells[*c_set]));
    if (!id || !set) {
      issues.push_back(where + ": unreadable essay_id or essay_set");
      continue;
    }
    if (*set < 1 || *set > 8) {
      issues.push_back("essay " + std::to_string(*id) + ": unknown essay_set " + std::to_string(*set));
      continue;
    }
    if (!options.prompts.empty() &&
        std::find(options.prompts.begin(), options.prompts.end(), *set) == options.prompts.end())
      continue;
    if (!seen.insert(*id).second) {
      issues.push_back("essay " + std::to_string(*id) + ": duplicate essay_id");
      continue;
    }
    const PromptSpec& spec = prompt_spec(*set);
    EssayRecord rec;
    rec.essay_id = *id;
    rec.prompt_id = *set;
    rec.text = unquote(cells[*c_essay]);
    const auto overall = parse_number<int>(unquote(cells[*c_score]));
    if (!overall) {
      issues.push_back("essay " + std::to_string(*id) + ": missing domain1_score");
      continue;
    }
    rec.overall_score = *overall;
    bool ok = true;
    if (!spec.overall_range.contains(rec.overall_score)) {
      issues.push_back("essay " + std::to_string(*id) + ": overall score " + std::to_string(rec.overall_score) +
                       " outside prompt " + std::to_string(*set) + " range " +
                       std::to_string(spec.overall_range.min) + "-" + std::to_string(spec.overall_range.max));
      ok = false;
    }
    auto row = trait_rows.find(*id);
    if (row == trait_rows.end()) {
      issues.push_back("essay " + std::to_string(*id) + ": absent from trait file");
      continue;
    }
    for (const auto& t : spec.traits) {
      auto cell = row->second.scores.find(t);
      if (cell == row->second.scores.end() || !cell->second) {
        issues.push_back("essay " + std::to_string(*id) + ": missing trait '" + t + "'");
        ok = false;
        continue;
      }
      if (!spec.trait_range.contains(*cell->second)) {
        issues.push_back("essay " + std::to_string(*id) + ": " + t + " score " + std::to_string(*cell->second) +
                         " outside trait range " + std::to_string(spec.trait_range.min) + "-" +
                         std::to_string(spec.trait_range.max));
        ok = false;
        continue;
      }
      rec.trait_scores[t] = *cell->second;
    }
    if (ok) data.by_prompt[*set].push_back(std::move(rec));
  }

  if (!issues.empty()) throw ValidationError(std::move(issues));
  return data;
}

void write_asap_tsv(const std::filesystem::path& path, std::span<const EssayRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "essay_id\tessay_set\tessay\tdomain1_score\n";
  for (const auto& r : records)
    out << r.essay_id << '\t' << r.prompt_id << '\t' << r.text << '\t' << r.overall_score << '\n';
}

void write_trait_csv(const std::filesystem::path& path, const PromptSpec& prompt,
                     std::span<const EssayRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "essay_id";
  for (const auto& t : prompt.traits) out << ',' << t;
  out << '\n';
  for (const auto& r : records) {
    if (r.prompt_id != prompt.prompt_id) continue;
    out << r.essay_id;
    for (const auto& t : prompt.traits) out << ',' << r.score_of(t);
    out << '\n';
  }
}

double normalize_score(int score, ScoreRange range) {
  if (range.min >= range.max) throw ArgumentError("score range must satisfy min < max");
  if (!range.contains(score))
    throw ArgumentError("score " + std::to_string(score) + " outside range " + std::to_string(range.min) + "-" +
                        std::to_string(range.max));
  return static_cast<double>(score - range.min) / static_cast<double>(range.max - range.min);
}

int denormalize_score(double y, ScoreRange range) {
  constexpr double slack = 1e-9;
  if (!(y >= -slack && y <= 1.0 + slack))
    throw ArgumentError("normalized score " + std::to_string(y) + " outside [0, 1]");
  y = std::clamp(y, 0.0, 1.0);
  const double raw = range.min + y * (range.max - range.min);
  // std::round rounds halfway cases away from zero.
  const int score = static_cast<int>(std::round(raw));
  return std::clamp(score, range.min, range.max);
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::dev: return "dev";
    case Partition::test: return "test";
  }
  return "?";
}

Partition parse_partition(std::string_view s) {
  const std::string t = lower(trim(s));
  if (t == "train") return Partition::train;
  if (t == "dev" || t == "valid" || t == "validation") return Partition::dev;
  if (t == "test") return Partition::test;
  throw ArgumentError("unknown partition '" + std::string(s) + "'");
}

std::vector<FoldSplit> make_folds(std::span<const EssayRecord> records, std::uint64_t seed) {
  if (records.size() < static_cast<std::size_t>(kFoldCount))
    throw ArgumentError("need at least 5 essays to build folds, got " + std::to_string(records.size()));
  std::vector<std::int64_t> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.essay_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  shuffle(std::span<std::int64_t>(ids), rng);

  const std::size_t n = ids.size();
  std::array<std::vector<std::int64_t>, kFoldCount> blocks;
  for (std::size_t b = 0; b < kFoldCount; ++b) {
    const std::size_t lo = n * b / kFoldCount, hi = n * (b + 1) / kFoldCount;
    blocks[b].assign(ids.begin() + static_cast<std::ptrdiff_t>(lo), ids.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  std::vector<FoldSplit> folds;
  for (int k = 0; k < kFoldCount; ++k) {
    FoldSplit f;
    f.fold_id = k;
    f.test_ids = blocks[static_cast<std::size_t>(k)];
    f.dev_ids = blocks[static_cast<std::size_t>((k + 1) % kFoldCount)];
    for (int b = 0; b < kFoldCount; ++b)
      if (b != k && b != (k + 1) % kFoldCount)
        f.train_ids.insert(f.train_ids.end(), blocks[static_cast<std::size_t>(b)].begin(),
                           blocks[static_cast<std::size_t>(b)].end());
    folds.push_back(std::move(f));
  }
  return folds;
}

void validate_folds(std::span<const FoldSplit> folds, std::span<const EssayRecord> records) {
  std::vector<std::string> issues;
  std::set<std::int64_t> all;
  for (const auto& r : records) all.insert(r.essay_id);
  std::map<std::int64_t, int> test_count;
  for (const auto& f : folds) {
    std::map<std::int64_t, int> seen;
    for (const auto* part : {&f.train_ids, &f.dev_ids, &f.test_ids})
      for (auto id : *part) {
        if (!all.count(id))
          issues.push_back("fold " + std::to_string(f.fold_id) + ": essay " + std::to_string(id) + " not in dataset");
        if (++seen[id] > 1)
          issues.push_back("fold " + std::to_string(f.fold_id) + ": essay " + std::to_string(id) +
                           " appears in two partitions");
      }
    for (auto id : all)
      if (!seen.count(id))
        issues.push_back("fold " + std::to_string(f.fold_id) + ": essay " + std::to_string(id) + " unassigned");
    for (auto id : f.test_ids) ++test_count[id];
  }
  if (folds.size() == static_cast<std::size_t>(kFoldCount))
    for (auto id : all)
      if (test_count[id] != 1)
        issues.push_back("essay " + std::to_string(id) + " is in " + std::to_string(test_count[id]) + " test sets");
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

std::vector<FoldAssignment> read_fold_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open fold file " + path.string()});
  std::vector<FoldAssignment> out;
  std::vector<std::string> issues;
  std::string line;
  std::size_t line_no = 0;
  while (getline_stripped(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto cells = split(line, '\t');
    const auto id = cells.size() == 3 ? parse_number<std::int64_t>(cells[0]) : std::nullopt;
    const auto fold = cells.size() == 3 ? parse_number<int>(cells[1]) : std::nullopt;
    if (!id || !fold || *fold < 0 || *fold >= kFoldCount) {
      if (line_no == 1) continue;  // header
      issues.push_back(path.string() + ":" + std::to_string(line_no) + ": expected essay_id<TAB>fold<TAB>partition");
      continue;
    }
    try {
      out.push_back({*id, *fold, parse_partition(cells[2])});
    } catch (const ArgumentError& e) {
      issues.push_back(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

void write_fold_file(const std::filesystem::path& path, std::span<const FoldSplit> folds) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  for (const auto& f : folds) {
    for (auto id : f.train_ids) out << id << '\t' << f.fold_id << "\ttrain\n";
    for (auto id : f.dev_ids) out << id << '\t' << f.fold_id << "\tdev\n";
    for (auto id : f.test_ids) out << id << '\t' << f.fold_id << "\ttest\n";
  }
}

std::vector<FoldSplit> folds_from_assignments(std::span<const FoldAssignment> assignments,
                                              std::span<const EssayRecord> records) {
  std::set<std::int64_t> ids;
  for (const auto& r : records) ids.insert(r.essay_id);
  std::vector<FoldSplit> folds(kFoldCount);
  for (int k = 0; k < kFoldCount; ++k) folds[static_cast<std::size_t>(k)].fold_id = k;
  for (const auto& a : assignments) {
    if (!ids.count(a.essay_id)) continue;
    auto& f = folds[static_cast<std::size_t>(a.fold_id)];
    switch (a.partition) {
      case Partition::train: f.train_ids.push_back(a.essay_id); break;
      case Partition::dev: f.dev_ids.push_back(a.essay_id); break;
      case Partition::test: f.test_ids.push_back(a.essay_id); break;
    }
  }
  validate_folds(folds, records);
  return folds;
}

}  // namespace traitgrade
