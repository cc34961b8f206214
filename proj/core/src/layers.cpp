#include "traitgrade/layers.hpp"

#include <cmath>
#include <string>

#include "traitgrade/errors.hpp"

namespace traitgrade {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (auto& x : t.data()) x = static_cast<Real>(uniform(rng, -limit, limit));
  t.set_requires_grad(true);
  return t;
}

Tensor zeros(std::size_t n, Real fill = Real{0}) {
  Tensor t({n}, fill);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

ConvParams init_conv(std::size_t window, std::size_t input_dim, std::size_t filters, Rng& rng) {
  return {glorot(window * input_dim, filters, rng), zeros(filters)};
}

AttentionParams init_attention(std::size_t dim, Rng& rng) {
  return {glorot(dim, dim, rng), zeros(dim), glorot(dim, 1, rng)};
}

LstmParams init_lstm(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  LstmParams p;
  for (std::size_t g = 0; g < 4; ++g) {
    p.gates[g].W = glorot(input_dim, hidden, rng);
    p.gates[g].U = glorot(hidden, hidden, rng);
    p.gates[g].b = zeros(hidden, g == static_cast<std::size_t>(Gate::forget) ? Real{1} : Real{0});
  }
  return p;
}

DenseParams init_dense(std::size_t input_dim, Rng& rng) { return {glorot(input_dim, 1, rng), zeros(1)}; }

std::size_t count(const ConvParams& p) { return p.kernel.size() + p.bias.size(); }
std::size_t count(const AttentionParams& p) { return p.W.size() + p.b.size() + p.v.size(); }
std::size_t count(const LstmParams& p) {
  std::size_t n = 0;
  for (const auto& g : p.gates) n += g.W.size() + g.U.size() + g.b.size();
  return n;
}
std::size_t count(const DenseParams& p) { return p.w.size() + p.b.size(); }

ConvVars bind(Tape& tape, ConvParams& p) { return {tape.parameter(p.kernel), tape.parameter(p.bias)}; }

AttentionVars bind(Tape& tape, AttentionParams& p) {
  return {tape.parameter(p.W), tape.parameter(p.b), tape.parameter(p.v)};
}

LstmVars bind(Tape& tape, LstmParams& p) {
  LstmVars v;
  for (std::size_t g = 0; g < 4; ++g)
    v.gates[g] = {tape.parameter(p.gates[g].W), tape.parameter(p.gates[g].U),
                  tape.parameter(p.gates[g].b)};
  return v;
}

DenseVars bind(Tape& tape, DenseParams& p) { return {tape.parameter(p.w), tape.parameter(p.b)}; }

namespace layers {

Var embed(Var table, std::span<const int> ids, std::span<const std::uint8_t> mask) {
  if (ids.empty()) throw ArgumentError("embed: empty token sequence");
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows())
      throw IndexError("embed: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(table.rows()));
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  return ops::gather_rows(table, rows, mask);
}

Var conv1d(Var x, const ConvVars& p, std::size_t group_len) {
  const std::size_t in_dim = x.cols();
  const std::size_t k_rows = p.kernel.rows();
  if (k_rows % in_dim != 0)
    throw ShapeError("conv1d: kernel " + to_string(p.kernel.shape()) + " does not fit input " +
                     to_string(x.shape()));
  const std::size_t window = k_rows / in_dim;
  const auto windows = ops::window_rows(x, group_len ? group_len : x.rows(), window);
  return ops::add_bias(ops::matmul(windows, p.kernel), p.bias);
}

Var attention_pool(Var H, const AttentionVars& p, std::size_t group_len,
                   std::span<const std::uint8_t> mask) {
  if (H.rows() == 0) throw ArgumentError("attention_pool: no rows to pool");
  const std::size_t g = group_len ? group_len : H.rows();
  const auto hidden = ops::tanh(ops::add_bias(ops::matmul(H, p.W), p.b));
  const auto scores = ops::matmul(hidden, p.v);
  const auto weights = ops::group_softmax(scores, g, mask);
  return ops::group_weighted_sum(H, weights, g);
}

std::vector<Var> lstm_forward(std::span<const Var> steps, const LstmVars& p,
                              std::span<const std::vector<std::uint8_t>> masks, bool reverse) {
  if (steps.empty()) throw ArgumentError("lstm_forward: empty sequence");
  if (!masks.empty() && masks.size() != steps.size())
    throw ShapeError("lstm_forward: one mask per step required");
  Tape& tape = steps.front().tape();
  const std::size_t B = steps.front().rows();
  const std::size_t h = p.gates[0].U.rows();

  std::vector<Var> out(steps.size());
  Var hs = tape.constant(Tensor({B, h}));
  Var cs = hs;
  bool first = true;
  const std::size_t S = steps.size();
  for (std::size_t k = 0; k < S; ++k) {
    const std::size_t t = reverse ? S - 1 - k : k;
    std::array<Var, 4> z;
    for (std::size_t g = 0; g < 4; ++g) {
      Var pre = ops::matmul(steps[t], p.gates[g].W);
      // The initial state is exactly zero, so its recurrent term is skipped.
      if (!first) pre = ops::add(pre, ops::matmul(hs, p.gates[g].U));
      z[g] = ops::add_bias(pre, p.gates[g].b);
    }
    const Var i = ops::sigmoid(z[static_cast<std::size_t>(Gate::input)]);
    const Var f = ops::sigmoid(z[static_cast<std::size_t>(Gate::forget)]);
    const Var o = ops::sigmoid(z[static_cast<std::size_t>(Gate::output)]);
    const Var cand = ops::tanh(z[static_cast<std::size_t>(Gate::cell)]);
    Var c_new = first ? ops::mul(i, cand) : ops::add(ops::mul(f, cs), ops::mul(i, cand));
    Var h_new = ops::mul(o, ops::tanh(c_new));
    if (!masks.empty()) {
      c_new = ops::select_rows(masks[t], c_new, cs);
      h_new = ops::select_rows(masks[t], h_new, hs);
    }
    cs = c_new;
    hs = h_new;
    out[t] = hs;
    first = false;
  }
  return out;
}

std::vector<Var> bilstm_forward(std::span<const Var> steps, const LstmVars& forward,
                                const LstmVars& backward,
                                std::span<const std::vector<std::uint8_t>> masks) {
  const auto fwd = lstm_forward(steps, forward, masks, false);
  const auto bwd = lstm_forward(steps, backward, masks, true);
  std::vector<Var> out(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const std::array<Var, 2> parts{fwd[t], bwd[t]};
    out[t] = ops::concat_cols(parts);
  }
  return out;
}

Var dense_sigmoid(Var x, const DenseVars& p) {
  return ops::sigmoid(ops::add_bias(ops::matmul(x, p.w), p.b));
}

Var mse_loss(Var pred, Var gold) { return ops::mean_squared_error(pred, gold); }

Var dropout(Var x, Real rate, Mode mode, Rng& rng) {
  if (!(rate >= 0 && rate < 1)) throw ArgumentError("dropout: rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0) return x;
  Tensor mask(x.shape());
  const Real keep_scale = Real{1} / (Real{1} - rate);
  for (auto& m : mask.data()) m = uniform01(rng) < static_cast<double>(rate) ? Real{0} : keep_scale;
  return ops::mul_constant(x, mask);
}

}  // namespace layers

Real mse_loss(std::span<const Real> pred, std::span<const Real> gold) {
  if (pred.size() != gold.size())
    throw ArgumentError("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(gold.size()) + " targets");
  if (pred.empty()) throw ArgumentError("mse_loss: empty input");
  Real total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - gold[i]) * (pred[i] - gold[i]);
  return total / static_cast<Real>(pred.size());
}

}  // namespace traitgrade
