#include <gtest/gtest.h>

#include <cmath>

#include "traitgrade/errors.hpp"
#include "traitgrade/ops.hpp"
#include "traitgrade/rng.hpp"

using namespace traitgrade;

namespace {

// Central-difference gradient of f at every entry of `t`.
template <typename F>
std::vector<double> numeric_grad(Tensor& t, F f, double eps = 1e-6) {
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Real saved = t[i];
    t[i] = saved + eps;
    const double up = f();
    t[i] = saved - eps;
    const double down = f();
    t[i] = saved;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (auto& x : t.data()) x = static_cast<Real>(uniform(rng, -1, 1));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

TEST(Tensor, ShapeInvariants) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  Tensor v({4});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 4u);
  EXPECT_THROW(Tensor({0, 2}), ShapeError);
  EXPECT_THROW(Tensor({2, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), ShapeError);
}

TEST(Tensor, ZeroGradsClearsEverything) {
  Tensor a({2, 2}, 1);
  a.grad()[0] = 3;
  a.grad()[3] = -1;
  Tensor* ps[] = {&a};
  zero_grads(ps);
  for (Real g : std::as_const(a).grad()) EXPECT_EQ(g, 0);
}

TEST(Ops, MatmulIdentityAndDot) {
  Tape tape;
  auto I = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto m = tape.constant(Tensor::matrix(2, 2, {3, 4, 5, 6}));
  const auto c = ops::matmul(I, m);
  EXPECT_EQ(std::vector<Real>(c.value().data().begin(), c.value().data().end()), (std::vector<Real>{3, 4, 5, 6}));
  auto row = tape.constant(Tensor::matrix(1, 2, {1, 2}));
  auto col = tape.constant(Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(ops::matmul(row, col).value().item(), 11);
}

TEST(Ops, MatmulShapeErrorNamesShapes) {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({2, 3}));
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Ops, MatmulGradientMatchesFiniteDifferences) {
  Rng rng(1);
  Tensor A = random_matrix(3, 4, rng), B = random_matrix(4, 2, rng);
  auto f = [&] {
    Tape t;
    return static_cast<double>(ops::sum(ops::matmul(t.parameter(A), t.parameter(B))).value().item());
  };
  {
    Tape t;
    t.backward(ops::sum(ops::matmul(t.parameter(A), t.parameter(B))));
  }
  for (Tensor* p : {&A, &B}) {
    const auto n = numeric_grad(*p, f);
    for (std::size_t i = 0; i < p->size(); ++i)
      EXPECT_LE(std::abs(std::as_const(*p).grad()[i] - n[i]) / std::max(1e-8, std::abs(n[i])), 1e-5);
  }
}

TEST(Ops, ElementwiseValuesAndShapes) {
  Tape tape;
  auto z = tape.constant(Tensor({1}, 0.0));
  EXPECT_DOUBLE_EQ(ops::sigmoid(z).value().item(), 0.5);
  EXPECT_DOUBLE_EQ(ops::tanh(z).value().item(), 0.0);
  auto a = tape.constant(Tensor::matrix(1, 3, {1, 2, 3}));
  auto b = tape.constant(Tensor::matrix(1, 3, {4, 5, 6}));
  EXPECT_EQ(ops::add(a, b).value()[2], 9);
  EXPECT_EQ(ops::sub(a, b).value()[0], -3);
  EXPECT_EQ(ops::mul(a, b).value()[1], 10);
  EXPECT_EQ(ops::scale(a, 2).value()[2], 6);
  auto c = tape.constant(Tensor({3, 1}));
  EXPECT_THROW(ops::add(a, c), ShapeError);
  EXPECT_THROW(ops::mul(a, c), ShapeError);
}

TEST(Ops, SigmoidGradientAtZero) {
  Tensor x({1}, 0.0);
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(ops::sum(ops::sigmoid(tape.parameter(x))));
  EXPECT_NEAR(std::as_const(x).grad()[0], 0.25, 1e-15);
  const auto n = numeric_grad(x, [&] {
    Tape t;
    return static_cast<double>(ops::sigmoid(t.parameter(x)).value().item());
  });
  EXPECT_NEAR(n[0], 0.25, 1e-9);
}

TEST(Ops, SigmoidIsStableForLargeInputs) {
  Tape tape;
  auto v = tape.constant(Tensor::matrix(1, 2, {-800, 800}));
  const auto s = ops::sigmoid(v).value();
  EXPECT_EQ(s[0], 0);
  EXPECT_EQ(s[1], 1);
}

TEST(Softmax, ConstantInputIsUniform) {
  for (Real c : {-3.0, 0.0, 7.5}) {
    const auto s = softmax(std::vector<Real>{c, c, c});
    for (Real v : s) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  const auto s = softmax(std::vector<Real>{1000, 0});
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_GE(s[1], 0.0);
  EXPECT_LT(s[1], 1e-300);
}

TEST(Softmax, MatchesHighPrecisionValues) {
  // exp(k) / (e + e^2 + e^3), evaluated at 30 significant digits.
  const auto s = softmax(std::vector<Real>{1, 2, 3});
  EXPECT_NEAR(s[0], 0.09003057317038046, 1e-12);
  EXPECT_NEAR(s[1], 0.24472847105479764, 1e-12);
  EXPECT_NEAR(s[2], 0.6652409557748219, 1e-12);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Real> v(1 + uniform_index(rng, 12));
    for (auto& x : v) x = static_cast<Real>(uniform(rng, -20, 20));
    const auto s = softmax(v);
    double total = 0;
    for (Real x : s) total += x;
    EXPECT_NEAR(total, 1.0, 1e-12);
    auto shifted = v;
    for (auto& x : shifted) x += 5.0;
    const auto t = softmax(shifted);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], t[i], 1e-12);
  }
}

TEST(Softmax, EmptyInputIsAnArgumentError) {
  EXPECT_THROW(softmax(std::vector<Real>{}), ArgumentError);
}

TEST(Backward, SumGivesOnes) {
  Tensor p({2, 3}, 0.7);
  p.set_requires_grad(true);
  Tape tape;
  tape.backward(ops::sum(tape.parameter(p)));
  for (Real g : std::as_const(p).grad()) EXPECT_EQ(g, 1);
}

TEST(Backward, HalfSquaredNormGivesTheTensor) {
  Tensor p = Tensor::matrix(2, 2, {1.5, -2, 0.25, 3});
  p.set_requires_grad(true);
  Tape tape;
  auto v = tape.parameter(p);
  tape.backward(ops::scale(ops::sum(ops::mul(v, v)), 0.5));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(std::as_const(p).grad()[i], p[i]);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Rng rng(9);
  Tensor A = random_matrix(2, 3, rng), B = random_matrix(3, 2, rng);
  auto run = [&] {
    Tape t;
    auto y = ops::tanh(ops::matmul(t.parameter(A), t.parameter(B)));
    t.backward(ops::sum(ops::mul(y, y)));
  };
  run();
  const std::vector<Real> once(std::as_const(A).grad().begin(), std::as_const(A).grad().end());
  run();
  for (std::size_t i = 0; i < A.size(); ++i) EXPECT_EQ(std::as_const(A).grad()[i], 2 * once[i]);
}

TEST(Backward, NonScalarLossIsAnArgumentError) {
  Tensor p({2, 2}, 1);
  p.set_requires_grad(true);
  Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(p)), ArgumentError);
}

TEST(Ops, StructuralOpsHaveCorrectGradients) {
  Rng rng(12);
  Tensor X = random_matrix(6, 3, rng), Y = random_matrix(6, 2, rng);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
  const std::vector<std::size_t> rows{5, 0};
  auto graph = [&](Tape& t) {
    auto x = t.parameter(X), y = t.parameter(Y);
    auto cat = ops::concat_cols(std::vector<Var>{x, y});
    auto w = ops::window_rows(cat, 3, 3);
    auto scores = ops::slice_cols(w, 0, 1);
    auto weights = ops::group_softmax(scores, 3, mask);
    auto pooled = ops::group_weighted_sum(cat, weights, 3);
    auto picked = ops::gather_rows(cat, rows);
    auto sel = ops::select_rows(std::vector<std::uint8_t>{1, 0}, pooled, ops::slice_cols(picked, 0, 5));
    return ops::sum(ops::mul(sel, sel));
  };
  {
    Tape t;
    t.backward(graph(t));
  }
  auto f = [&] {
    Tape t;
    return static_cast<double>(graph(t).value().item());
  };
  for (Tensor* p : {&X, &Y}) {
    const auto n = numeric_grad(*p, f);
    for (std::size_t i = 0; i < p->size(); ++i)
      EXPECT_NEAR(std::as_const(*p).grad()[i], n[i], 1e-7 * std::max(1.0, std::abs(n[i])));
  }
}

TEST(Ops, GroupSoftmaxIgnoresMaskedRows) {
  Tape tape;
  auto s = tape.constant(Tensor::matrix(4, 1, {1, 50, 2, 3}));
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  const auto w = ops::group_softmax(s, 2, mask).value();
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_NEAR(w[2] + w[3], 1.0, 1e-15);
}

TEST(Ops, GatherRowsRejectsOutOfRange) {
  Tape tape;
  auto x = tape.constant(Tensor({2, 2}));
  const std::vector<std::size_t> rows{2};
  EXPECT_THROW(ops::gather_rows(x, rows), IndexError);
}
