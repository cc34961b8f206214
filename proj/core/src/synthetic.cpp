#include "traitgrade/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "traitgrade/errors.hpp"
#include "traitgrade/rng.hpp"

namespace traitgrade {

namespace {

constexpr std::array<const char*, 10> kGood{"clear",  "vivid",  "precise",  "strong",     "coherent",
                                            "fluent", "elegant", "accurate", "insightful", "compelling"};
constexpr std::array<const char*, 10> kBad{"vague", "dull",  "sloppy", "weak",    "confused",
                                           "choppy", "clumsy", "wrong", "shallow", "boring"};
constexpr std::array<const char*, 32> kFiller{
    "the",   "a",     "people", "school", "think", "because", "computer", "time",  "we",    "they", "should",
    "about", "many",  "day",    "home",   "friend", "learn",  "world",    "would", "their", "this", "is",
    "was",   "every", "family", "book",   "city",  "write",   "read",     "then",  "when",  "with"};

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

int scale_score(double q, ScoreRange r) {
  return std::clamp(r.min + static_cast<int>(std::lround(q * (r.max - r.min))), r.min, r.max);
}

}  // namespace

std::vector<EssayRecord> make_synthetic_records(const SyntheticOptions& o) {
  if (o.essays_per_prompt == 0) throw ArgumentError("synthetic data needs at least one essay per prompt");
  if (o.min_sentences == 0 || o.min_sentences > o.max_sentences || o.min_tokens == 0 || o.min_tokens > o.max_tokens)
    throw ArgumentError("invalid synthetic length bounds");
  std::vector<EssayRecord> out;
  std::int64_t next_id = 1;
  for (int p : o.prompts) {
    const PromptSpec& spec = prompt_spec(p);
    Rng rng = derive_rng(o.seed, static_cast<std::uint64_t>(p));
    for (std::size_t e = 0; e < o.essays_per_prompt; ++e) {
      EssayRecord r;
      r.essay_id = next_id++;
      r.prompt_id = p;
      const double quality = uniform01(rng);
      std::vector<double> trait_q;
      double total = 0;
      for (std::size_t k = 0; k < spec.traits.size(); ++k) {
        const double q = std::clamp(quality + uniform(rng, -0.15, 0.15), 0.0, 1.0);
        const int s = scale_score(q, spec.trait_range);
        r.trait_scores[spec.traits[k]] = s;
        trait_q.push_back(normalize_score(s, spec.trait_range));
        total += trait_q.back();
      }
      r.overall_score = scale_score(total / static_cast<double>(spec.traits.size()), spec.overall_range);

      const auto span = o.max_sentences - o.min_sentences;
      const auto base = o.min_sentences + static_cast<std::size_t>(std::lround(quality * static_cast<double>(span)));
      const std::size_t sentences = std::clamp<std::size_t>(base + pick(rng, 0, 1), o.min_sentences, o.max_sentences);
      for (std::size_t s = 0; s < sentences; ++s) {
        std::vector<std::string> words;
        const std::size_t n = pick(rng, o.min_tokens, o.max_tokens);
        for (std::size_t t = 0; t < n; ++t) words.emplace_back(kFiller[uniform_index(rng, kFiller.size())]);
        for (std::size_t k = 0; k < trait_q.size(); ++k) {
          const char* marker = uniform01(rng) < trait_q[k] ? kGood[k % kGood.size()] : kBad[k % kBad.size()];
          words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, words.size() + 1)), marker);
        }
        if (uniform01(rng) < 0.1) words.insert(words.begin(), "@PERSON1");
        std::string sentence;
        for (const auto& w : words) sentence += (sentence.empty() ? "" : " ") + w;
        sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
        r.text += (r.text.empty() ? "" : " ") + sentence + ".";
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

SyntheticFiles write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options) {
  const auto records = make_synthetic_records(options);
  SyntheticFiles files{dir / "training_set_rel3.tsv", dir / "traits"};
  std::filesystem::create_directories(files.trait_dir);
  write_asap_tsv(files.asap_tsv, records);
  for (int p : options.prompts) {
    std::vector<EssayRecord> subset;
    for (const auto& r : records)
      if (r.prompt_id == p) subset.push_back(r);
    write_trait_csv(files.trait_dir / ("prompt" + std::to_string(p) + ".csv"), prompt_spec(p), subset);
  }
  return files;
}

}  // namespace traitgrade
