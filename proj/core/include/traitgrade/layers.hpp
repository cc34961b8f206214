#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "traitgrade/ops.hpp"
#include "traitgrade/rng.hpp"
#include "traitgrade/tensor.hpp"

namespace traitgrade {

enum class Mode { train, eval };

// Trainable tensors of the layer zoo. Matrices are stored input-major so a row
// vector x maps to x * W.

struct ConvParams {
  Tensor kernel;  // [window * input_dim, filters]
  Tensor bias;    // [filters]
};

// Scores u_i = v . tanh(W h_i + b); weights softmax(u); output sum_i a_i h_i.
struct AttentionParams {
  Tensor W;  // [r, r]
  Tensor b;  // [r]
  Tensor v;  // [r, 1]
};

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, cell = 3 };

struct LstmGateParams {
  Tensor W;  // [input_dim, hidden]
  Tensor U;  // [hidden, hidden]
  Tensor b;  // [hidden]
};

struct LstmParams {
  std::array<LstmGateParams, 4> gates;
  std::size_t hidden() const { return gates[0].U.rows(); }
};

struct DenseParams {
  Tensor w;  // [input_dim, 1]
  Tensor b;  // [1]
};

// Glorot-uniform initialisation; biases zero, LSTM forget bias one.
ConvParams init_conv(std::size_t window, std::size_t input_dim, std::size_t filters, Rng& rng);
AttentionParams init_attention(std::size_t dim, Rng& rng);
LstmParams init_lstm(std::size_t input_dim, std::size_t hidden, Rng& rng);
DenseParams init_dense(std::size_t input_dim, Rng& rng);

std::size_t count(const ConvParams& p);
std::size_t count(const AttentionParams& p);
std::size_t count(const LstmParams& p);
std::size_t count(const DenseParams& p);

// The same parameters bound to a tape.
struct ConvVars {
  Var kernel, bias;
};
struct AttentionVars {
  Var W, b, v;
};
struct LstmGateVars {
  Var W, U, b;
};
struct LstmVars {
  std::array<LstmGateVars, 4> gates;
};
struct DenseVars {
  Var w, b;
};

ConvVars bind(Tape& tape, ConvParams& p);
AttentionVars bind(Tape& tape, AttentionParams& p);
LstmVars bind(Tape& tape, LstmParams& p);
DenseVars bind(Tape& tape, DenseParams& p);

namespace layers {

// Row i = table[ids[i]]; rows with mask 0 are zero and receive no gradient.
Var embed(Var table, std::span<const int> ids, std::span<const std::uint8_t> mask = {});

// Same-padded 1-D convolution with no activation. `x` is one sequence, or
// consecutive sequences of `group_len` rows each when group_len > 0.
Var conv1d(Var x, const ConvVars& p, std::size_t group_len = 0);

// Pools each group of `group_len` rows (the whole input when 0) into one row.
// Rows with mask 0 are ignored.
Var attention_pool(Var H, const AttentionVars& p, std::size_t group_len = 0,
                   std::span<const std::uint8_t> mask = {});

// Runs an LSTM over steps[t] (each B x input_dim) from zero state and returns every
// hidden state in input order. When masks are given, rows with mask 0 at step t
// carry their state through unchanged.
std::vector<Var> lstm_forward(std::span<const Var> steps, const LstmVars& p,
                              std::span<const std::vector<std::uint8_t>> masks = {},
                              bool reverse = false);

// Forward and reversed passes concatenated per step (2h columns).
std::vector<Var> bilstm_forward(std::span<const Var> steps, const LstmVars& forward,
                                const LstmVars& backward,
                                std::span<const std::vector<std::uint8_t>> masks = {});

Var dense_sigmoid(Var x, const DenseVars& p);

Var mse_loss(Var pred, Var gold);

// Inverted dropout: in train mode entries are zeroed with probability `rate` and
// survivors scaled by 1/(1-rate). Identity in eval mode or at rate 0.
Var dropout(Var x, Real rate, Mode mode, Rng& rng);

}  // namespace layers

Real mse_loss(std::span<const Real> pred, std::span<const Real> gold);

}  // namespace traitgrade
