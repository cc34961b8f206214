#pragma once

#include <span>
#include <vector>

#include "traitgrade/dataset.hpp"

namespace traitgrade {

// Cohen's kappa with quadratic weights over every category of `range`, including
// scores that never occur. Constant raters that agree everywhere score 1.
double qwk(std::span<const int> pred, std::span<const int> gold, ScoreRange range);

// Same with linear weights |i-j|/(N-1); a comparison utility only.
double linear_kappa(std::span<const int> pred, std::span<const int> gold, ScoreRange range);

struct TTestResult {
  double t = 0;
  double p = 1;
  std::size_t df = 0;
  double mean_difference = 0;
  // Set when every difference is the same non-zero value: the variance is zero,
  // t is infinite and p is reported as 0.
  bool degenerate_variance = false;
};

// Two-sided paired t-test on a[i] - b[i].
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Per-essay squared errors, the pairing unit of the per-essay t-test mode.
std::vector<double> squared_errors(std::span<const int> pred, std::span<const int> gold);

double mean(std::span<const double> values);

}  // namespace traitgrade
