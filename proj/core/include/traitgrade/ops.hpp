#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "traitgrade/tensor.hpp"

// Differentiable operations recorded on a Tape. Binary elementwise operations
// require identical shapes; the only broadcast is the explicit add_bias.
namespace traitgrade::ops {

Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var tanh(Var a);
Var sigmoid(Var a);

// Adds a length-c bias to every row of an r x c matrix.
Var add_bias(Var x, Var bias);

// Softmax over every element of `v`, computed with max subtraction.
Var softmax(Var v);

Var sum(Var a);
Var mean_squared_error(Var pred, Var target);

// out[i] = src[rows[i]], or a zero row where keep[i] == 0. An empty `keep` keeps all.
Var gather_rows(Var src, std::span<const std::size_t> rows, std::span<const std::uint8_t> keep = {});

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

// Sliding-window expansion for a 1-D convolution with zero "same" padding. `x` holds
// consecutive groups of `group_len` rows; windows never cross a group boundary. Row
// (g, t) of the result concatenates rows t - (width-1)/2 ... t + width/2 of group g.
Var window_rows(Var x, std::size_t group_len, std::size_t width);

// Softmax of a column of scores within consecutive groups of `group_len` entries.
// Entries with mask == 0 get weight 0; a fully masked group yields all zeros.
Var group_softmax(Var scores, std::size_t group_len, std::span<const std::uint8_t> mask = {});

// out[g] = sum_t weights[g*group_len + t] * values[g*group_len + t].
Var group_weighted_sum(Var values, Var weights, std::size_t group_len);

// steps[s] is B x r; result row b*S + s holds steps[s] row b.
Var interleave_steps(std::span<const Var> steps);

// Row-wise choice: out[i] = take_first[i] ? a[i] : b[i].
Var select_rows(std::span<const std::uint8_t> take_first, Var a, Var b);

// Elementwise product with a constant tensor of the same shape.
Var mul_constant(Var a, const Tensor& factor);

}  // namespace traitgrade::ops

namespace traitgrade {

// Plain numeric softmax used outside of graphs. Throws ArgumentError on empty input.
std::vector<Real> softmax(std::span<const Real> values);

}  // namespace traitgrade
