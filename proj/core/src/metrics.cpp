#include "traitgrade/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "traitgrade/errors.hpp"

namespace traitgrade {

namespace {

void check_ratings(std::span<const int> pred, std::span<const int> gold, ScoreRange range) {
  if (range.max < range.min) throw ArgumentError("score range is empty");
  if (pred.size() != gold.size())
    throw ArgumentError("kappa: " + std::to_string(pred.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold scores");
  if (pred.size() < 2) throw ArgumentError("kappa needs at least two ratings");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!range.contains(pred[i]) || !range.contains(gold[i]))
      throw ArgumentError("rating pair " + std::to_string(i) + " (" + std::to_string(pred[i]) + ", " +
                          std::to_string(gold[i]) + ") outside range " + std::to_string(range.min) + "-" +
                          std::to_string(range.max));
  }
}

// Weighted kappa with integer disagreement weights d(i, j). The (N-1)^p
// normalisation and the 1/n scaling of E cancel, so observed and expected
// disagreement are compared as n * sum d*O against sum d*hist_p*hist_g.
template <typename Weight>
double weighted_kappa(std::span<const int> pred, std::span<const int> gold, ScoreRange range, Weight weight) {
  check_ratings(pred, gold, range);
  const auto N = static_cast<std::size_t>(range.categories());
  const auto n = static_cast<double>(pred.size());
  std::vector<double> hist_p(N, 0), hist_g(N, 0);
  double observed = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto a = static_cast<std::size_t>(pred[i] - range.min);
    const auto b = static_cast<std::size_t>(gold[i] - range.min);
    hist_p[a] += 1;
    hist_g[b] += 1;
    observed += weight(a, b);
  }
  double expected = 0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) expected += weight(i, j) * hist_p[i] * hist_g[j];
  if (expected == 0) return observed == 0 ? 1.0 : 0.0;
  return 1.0 - n * observed / expected;
}

}  // namespace

double qwk(std::span<const int> pred, std::span<const int> gold, ScoreRange range) {
  return weighted_kappa(pred, gold, range, [](std::size_t i, std::size_t j) {
    const double d = static_cast<double>(i) - static_cast<double>(j);
    return d * d;
  });
}

double linear_kappa(std::span<const int> pred, std::span<const int> gold, ScoreRange range) {
  return weighted_kappa(pred, gold, range, [](std::size_t i, std::size_t j) {
    return std::abs(static_cast<double>(i) - static_cast<double>(j));
  });
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ArgumentError("paired t-test: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                        " observations");
  if (a.size() < 2) throw ArgumentError("paired t-test needs at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];

  TTestResult r;
  r.df = n - 1;
  r.mean_difference = mean(d);
  double ss = 0;
  for (double x : d) ss += (x - r.mean_difference) * (x - r.mean_difference);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  const bool all_zero = std::all_of(d.begin(), d.end(), [](double x) { return x == 0; });
  if (all_zero) return r;
  if (sd == 0) {
    r.degenerate_variance = true;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
    r.p = 0;
    return r;
  }
  r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::vector<double> squared_errors(std::span<const int> pred, std::span<const int> gold) {
  if (pred.size() != gold.size()) throw ArgumentError("squared_errors: length mismatch");
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - gold[i];
    out[i] = e * e;
  }
  return out;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of no values");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace traitgrade
