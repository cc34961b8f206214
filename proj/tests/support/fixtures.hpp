#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "traitgrade/metrics.hpp"
#include "traitgrade/model.hpp"
#include "traitgrade/rng.hpp"

namespace traitgrade::testing {

inline Hyperparams reduced_hyper(std::size_t embed = 8, std::size_t filters = 10, std::size_t hidden = 10) {
  Hyperparams h;
  h.embed_dim = embed;
  h.filters = filters;
  h.hidden = hidden;
  return h;
}

inline ModelConfig toy_config(TaskMode mode, RecurrentKind rec, int prompt = 3, std::size_t vocab = 20,
                              std::uint64_t seed = 11) {
  ModelConfig c;
  c.mode = mode;
  c.recurrent = rec;
  c.prompt_id = prompt;
  c.hyper = reduced_hyper();
  c.vocab_size = vocab;
  c.seed = seed;
  return c;
}

// Random essay with sentence and token counts drawn from the given ranges and
// ids from [2, vocab).
inline EncodedEssay random_essay(Rng& rng, std::size_t min_s, std::size_t max_s, std::size_t min_t, std::size_t max_t,
                                 std::size_t vocab) {
  EncodedEssay e(min_s + uniform_index(rng, max_s - min_s + 1));
  for (auto& s : e) {
    s.resize(min_t + uniform_index(rng, max_t - min_t + 1));
    for (auto& id : s) id = 2 + static_cast<int>(uniform_index(rng, vocab - 2));
  }
  return e;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("traitgrade-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct GradCheck {
  std::size_t coordinates = 0;
  std::size_t above_tolerance = 0;
  double max_relative_error = 0;
  std::string worst;
};

// Compares the tape gradient of `loss` with central differences on every
// parameter coordinate. Relative error is |a-n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(Model& model, const std::function<Var(Tape&)>& loss, double tolerance = 1e-4,
                                double eps = 1e-4, double floor = 1e-6) {
  auto named = model.named_parameters();
  std::vector<Tensor*> params;
  for (auto& n : named) params.push_back(n.tensor);
  zero_grads(params);
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&loss] {
    Tape tape;
    return static_cast<double>(loss(tape).value().item());
  };
  GradCheck r;
  for (auto& [name, t] : named) {
    const std::vector<Real> analytic(t->grad().begin(), t->grad().end());
    for (std::size_t i = 0; i < t->size(); ++i) {
      const Real saved = (*t)[i];
      (*t)[i] = saved + static_cast<Real>(eps);
      const double up = value();
      (*t)[i] = saved - static_cast<Real>(eps);
      const double down = value();
      (*t)[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++r.coordinates;
      if (rel > tolerance) ++r.above_tolerance;
      if (rel > r.max_relative_error) {
        r.max_relative_error = rel;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  zero_grads(params);
  return r;
}

// Quadratic weighted kappa computed literally: weight matrix, observed matrix,
// expected matrix from the marginals scaled to the observed total.
inline double brute_force_qwk(const std::vector<int>& a, const std::vector<int>& b, int lo, int hi) {
  const int N = hi - lo + 1;
  std::vector<std::vector<double>> W(N, std::vector<double>(N)), O(N, std::vector<double>(N, 0)),
      E(N, std::vector<double>(N, 0));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) W[i][j] = N == 1 ? 0.0 : double((i - j) * (i - j)) / double((N - 1) * (N - 1));
  std::vector<double> ha(N, 0), hb(N, 0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    O[a[k] - lo][b[k] - lo] += 1;
    ha[a[k] - lo] += 1;
    hb[b[k] - lo] += 1;
  }
  double total = static_cast<double>(a.size());
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) E[i][j] = ha[i] * hb[j] / total;
  double num = 0, den = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      num += W[i][j] * O[i][j];
      den += W[i][j] * E[i][j];
    }
  if (den == 0) return num == 0 ? 1.0 : 0.0;
  return 1.0 - num / den;
}

}  // namespace traitgrade::testing
