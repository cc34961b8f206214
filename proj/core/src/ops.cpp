#include "traitgrade/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "traitgrade/errors.hpp"

namespace traitgrade::ops {

namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

// Adds `src` into the gradient of node `id` if that node wants one.
void accumulate(Tape& tape, std::size_t id, std::span<const Real> src) {
  if (!tape.needs_grad(id)) return;
  auto dst = tape.grad(id);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real{1} + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k)
    throw ShapeError("matmul: inner dimensions differ: " + to_string(av.shape()) + " x " +
                     to_string(bv.shape()));
  Tensor out({m, n});
  const Real* A = av.data().data();
  const Real* B = bv.data().data();
  Real* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    Real* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = A[i * k + p];
      const Real* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += aip * brow[j];
    }
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const Real* A = tape.value(a.id()).data().data();
    const Real* B = tape.value(b.id()).data().data();
    if (tape.needs_grad(a.id())) {
      Real* dA = tape.grad(a.id()).data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const Real* brow = B + p * n;
          const Real* grow = g.data() + i * n;
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          dA[i * k + p] += acc;
        }
    }
    if (tape.needs_grad(b.id())) {
      Real* dB = tape.grad(b.id()).data();
      for (std::size_t i = 0; i < m; ++i) {
        const Real* grow = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = A[i * k + p];
          Real* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out.set_requires_grad(false);
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    accumulate(tape, a.id(), g);
    accumulate(tape, b.id(), g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  out.set_requires_grad(false);
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    accumulate(tape, a.id(), g);
    if (tape.needs_grad(b.id())) {
      auto db = tape.grad(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  out.set_requires_grad(false);
  const auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const auto av = tape.value(a.id()).data();
    const auto bv = tape.value(b.id()).data();
    if (tape.needs_grad(a.id())) {
      auto da = tape.grad(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (tape.needs_grad(b.id())) {
      auto db = tape.grad(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, Real factor) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (auto& x : out.data()) x *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    auto da = tape.grad(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += factor * g[i];
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (auto& x : out.data()) x = std::tanh(x);
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const auto y = tape.value(self).data();
    auto da = tape.grad(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (Real{1} - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (auto& x : out.data()) x = sigmoid_scalar(x);
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const auto y = tape.value(self).data();
    auto da = tape.grad(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (Real{1} - y[i]);
  });
}

Var add_bias(Var x, Var bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.value().size() != c)
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not fit rows of " +
                     to_string(x.shape()));
  Tensor out = x.value();
  out.set_requires_grad(false);
  const auto bd = bias.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) od[i * c + j] += bd[j];
  return x.tape().record(std::move(out), {x, bias}, [x, bias, r, c](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    accumulate(tape, x.id(), g);
    if (tape.needs_grad(bias.id())) {
      auto db = tape.grad(bias.id());
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) db[j] += g[i * c + j];
    }
  });
}

Var softmax(Var v) {
  Tensor out = v.value();
  out.set_requires_grad(false);
  const auto probs = traitgrade::softmax(v.value().data());
  std::copy(probs.begin(), probs.end(), out.data().begin());
  return v.tape().record(std::move(out), {v}, [v](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const auto y = tape.value(self).data();
    Real dot = 0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    auto dv = tape.grad(v.id());
    for (std::size_t i = 0; i < g.size(); ++i) dv[i] += y[i] * (g[i] - dot);
  });
}

Var sum(Var a) {
  Real total = 0;
  for (auto x : a.value().data()) total += x;
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& tape, std::size_t self) {
    const Real g = tape.grad_view(self)[0];
    for (auto& d : tape.grad(a.id())) d += g;
  });
}

Var mean_squared_error(Var pred, Var target) {
  require_same_shape("mean_squared_error", pred, target);
  const auto p = pred.value().data();
  const auto t = target.value().data();
  const std::size_t n = p.size();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  return pred.tape().record(
      Tensor::scalar(total / static_cast<Real>(n)), {pred, target},
      [pred, target, n](Tape& tape, std::size_t self) {
        const Real g = tape.grad_view(self)[0] * Real{2} / static_cast<Real>(n);
        const auto p = tape.value(pred.id()).data();
        const auto t = tape.value(target.id()).data();
        if (tape.needs_grad(pred.id())) {
          auto dp = tape.grad(pred.id());
          for (std::size_t i = 0; i < n; ++i) dp[i] += g * (p[i] - t[i]);
        }
        if (tape.needs_grad(target.id())) {
          auto dt = tape.grad(target.id());
          for (std::size_t i = 0; i < n; ++i) dt[i] -= g * (p[i] - t[i]);
        }
      });
}

Var gather_rows(Var src, std::span<const std::size_t> rows, std::span<const std::uint8_t> keep) {
  const std::size_t n_src = src.rows(), c = src.cols();
  if (rows.empty()) throw ArgumentError("gather_rows: no rows requested");
  if (!keep.empty() && keep.size() != rows.size())
    throw ShapeError("gather_rows: mask length differs from row count");
  for (auto r : rows)
    if (r >= n_src)
      throw IndexError("gather_rows: index " + std::to_string(r) + " out of range [0, " +
                       std::to_string(n_src) + ")");
  Tensor out({rows.size(), c});
  const auto s = src.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!keep.empty() && !keep[i]) continue;
    std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                od.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<std::uint8_t> mask(keep.begin(), keep.end());
  return src.tape().record(
      std::move(out), {src},
      [src, idx = std::move(idx), mask = std::move(mask), c](Tape& tape, std::size_t self) {
        auto g = tape.grad_view(self);
        auto ds = tape.grad(src.id());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (!mask.empty() && !mask[i]) continue;
          Real* d = ds.data() + idx[i] * c;
          const Real* gi = g.data() + i * c;
          for (std::size_t j = 0; j < c; ++j) d[j] += gi[j];
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r)
      throw ShapeError("concat_cols: row counts differ: " + to_string(parts.front().shape()) +
                       " vs " + to_string(p.shape()));
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out({r, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out.at(i, offset + j) = src[i * widths[k] + j];
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      std::move(out), std::span<const Var>(inputs),
      [inputs, widths, r, total](Tape& tape, std::size_t self) {
        auto g = tape.grad_view(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          if (tape.needs_grad(inputs[k].id())) {
            auto d = tape.grad(inputs[k].id());
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j)
                d[i * widths[k] + j] += g[i * total + offset + j];
          }
          offset += widths[k];
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin >= end || end > c)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + to_string(a.shape()));
  const std::size_t w = end - begin;
  Tensor out({r, w});
  const auto src = a.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = src[i * c + begin + j];
  return a.tape().record(std::move(out), {a}, [a, r, c, begin, w](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    auto d = tape.grad(a.id());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) d[i * c + begin + j] += g[i * w + j];
  });
}

Var window_rows(Var x, std::size_t group_len, std::size_t width) {
  const std::size_t n = x.rows(), d = x.cols();
  if (group_len == 0 || n % group_len != 0)
    throw ShapeError("window_rows: " + std::to_string(n) + " rows do not split into groups of " +
                     std::to_string(group_len));
  if (width == 0) throw ArgumentError("window_rows: width must be positive");
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
  const std::ptrdiff_t T = static_cast<std::ptrdiff_t>(group_len);
  Tensor out({n, width * d});
  const auto src = x.value().data();
  auto od = out.data();
  for (std::size_t row = 0; row < n; ++row) {
    const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(row % group_len);
    const std::size_t base = row - static_cast<std::size_t>(t);
    for (std::size_t k = 0; k < width; ++k) {
      const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - left;
      if (s < 0 || s >= T) continue;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((base + static_cast<std::size_t>(s)) * d),
                  d, od.begin() + static_cast<std::ptrdiff_t>(row * width * d + k * d));
    }
  }
  return x.tape().record(std::move(out), {x}, [x, n, d, width, left, T, group_len](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    auto dx = tape.grad(x.id());
    for (std::size_t row = 0; row < n; ++row) {
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(row % group_len);
      const std::size_t base = row - static_cast<std::size_t>(t);
      for (std::size_t k = 0; k < width; ++k) {
        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - left;
        if (s < 0 || s >= T) continue;
        Real* dst = dx.data() + (base + static_cast<std::size_t>(s)) * d;
        const Real* gs = g.data() + row * width * d + k * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += gs[j];
      }
    }
  });
}

Var group_softmax(Var scores, std::size_t group_len, std::span<const std::uint8_t> mask) {
  const std::size_t n = scores.value().size();
  if (scores.cols() != 1 && scores.rows() != 1)
    throw ShapeError("group_softmax: scores must be a vector, got " + to_string(scores.shape()));
  if (group_len == 0 || n % group_len != 0)
    throw ShapeError("group_softmax: " + std::to_string(n) + " scores do not split into groups of " +
                     std::to_string(group_len));
  if (!mask.empty() && mask.size() != n) throw ShapeError("group_softmax: mask length mismatch");
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  if (keep.empty()) keep.assign(n, 1);

  Tensor out(scores.shape());
  const auto s = scores.value().data();
  auto w = out.data();
  for (std::size_t base = 0; base < n; base += group_len) {
    Real hi = -std::numeric_limits<Real>::infinity();
    for (std::size_t t = 0; t < group_len; ++t)
      if (keep[base + t]) hi = std::max(hi, s[base + t]);
    if (hi == -std::numeric_limits<Real>::infinity()) continue;
    Real total = 0;
    for (std::size_t t = 0; t < group_len; ++t)
      if (keep[base + t]) {
        w[base + t] = std::exp(s[base + t] - hi);
        total += w[base + t];
      }
    for (std::size_t t = 0; t < group_len; ++t) w[base + t] /= total;
  }
  return scores.tape().record(std::move(out), {scores}, [scores, n, group_len](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const auto y = tape.value(self).data();
    auto ds = tape.grad(scores.id());
    for (std::size_t base = 0; base < n; base += group_len) {
      Real dot = 0;
      for (std::size_t t = 0; t < group_len; ++t) dot += g[base + t] * y[base + t];
      for (std::size_t t = 0; t < group_len; ++t) ds[base + t] += y[base + t] * (g[base + t] - dot);
    }
  });
}

Var group_weighted_sum(Var values, Var weights, std::size_t group_len) {
  const std::size_t n = values.rows(), r = values.cols();
  if (weights.value().size() != n)
    throw ShapeError("group_weighted_sum: weights " + to_string(weights.shape()) +
                     " do not match values " + to_string(values.shape()));
  if (group_len == 0 || n % group_len != 0)
    throw ShapeError("group_weighted_sum: rows do not split into groups");
  const std::size_t groups = n / group_len;
  Tensor out({groups, r});
  const auto v = values.value().data();
  const auto w = weights.value().data();
  auto od = out.data();
  for (std::size_t row = 0; row < n; ++row) {
    const Real wi = w[row];
    if (wi == Real{0}) continue;
    Real* dst = od.data() + (row / group_len) * r;
    const Real* src = v.data() + row * r;
    for (std::size_t j = 0; j < r; ++j) dst[j] += wi * src[j];
  }
  return values.tape().record(
      std::move(out), {values, weights}, [values, weights, n, r, group_len](Tape& tape, std::size_t self) {
        auto g = tape.grad_view(self);
        const auto v = tape.value(values.id()).data();
        const auto w = tape.value(weights.id()).data();
        const bool want_v = tape.needs_grad(values.id());
        const bool want_w = tape.needs_grad(weights.id());
        std::span<Real> dv, dw;
        if (want_v) dv = tape.grad(values.id());
        if (want_w) dw = tape.grad(weights.id());
        for (std::size_t row = 0; row < n; ++row) {
          const Real* gg = g.data() + (row / group_len) * r;
          const Real* src = v.data() + row * r;
          if (want_v)
            for (std::size_t j = 0; j < r; ++j) dv[row * r + j] += w[row] * gg[j];
          if (want_w) {
            Real acc = 0;
            for (std::size_t j = 0; j < r; ++j) acc += src[j] * gg[j];
            dw[row] += acc;
          }
        }
      });
}

Var interleave_steps(std::span<const Var> steps) {
  if (steps.empty()) throw ArgumentError("interleave_steps: no steps");
  const std::size_t S = steps.size(), B = steps.front().rows(), r = steps.front().cols();
  for (const auto& s : steps)
    if (s.rows() != B || s.cols() != r)
      throw ShapeError("interleave_steps: steps differ in shape: " + to_string(steps.front().shape()) +
                       " vs " + to_string(s.shape()));
  Tensor out({B * S, r});
  for (std::size_t s = 0; s < S; ++s) {
    const auto src = steps[s].value().data();
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(b * r), r,
                  out.data().begin() + static_cast<std::ptrdiff_t>((b * S + s) * r));
  }
  std::vector<Var> inputs(steps.begin(), steps.end());
  return steps.front().tape().record(std::move(out), std::span<const Var>(inputs),
                                     [inputs, S, B, r](Tape& tape, std::size_t self) {
                                       auto g = tape.grad_view(self);
                                       for (std::size_t s = 0; s < S; ++s) {
                                         if (!tape.needs_grad(inputs[s].id())) continue;
                                         auto d = tape.grad(inputs[s].id());
                                         for (std::size_t b = 0; b < B; ++b)
                                           for (std::size_t j = 0; j < r; ++j)
                                             d[b * r + j] += g[(b * S + s) * r + j];
                                       }
                                     });
}

Var select_rows(std::span<const std::uint8_t> take_first, Var a, Var b) {
  require_same_shape("select_rows", a, b);
  const std::size_t r = a.rows(), c = a.cols();
  if (take_first.size() != r) throw ShapeError("select_rows: mask length differs from row count");
  Tensor out = a.value();
  out.set_requires_grad(false);
  const auto bd = b.value().data();
  for (std::size_t i = 0; i < r; ++i)
    if (!take_first[i])
      std::copy_n(bd.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  std::vector<std::uint8_t> mask(take_first.begin(), take_first.end());
  return a.tape().record(std::move(out), {a, b}, [a, b, mask = std::move(mask), c](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    const bool want_a = tape.needs_grad(a.id());
    const bool want_b = tape.needs_grad(b.id());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const bool first = mask[i] != 0;
      if (first ? !want_a : !want_b) continue;
      auto d = tape.grad(first ? a.id() : b.id());
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[i * c + j];
    }
  });
}

Var mul_constant(Var a, const Tensor& factor) {
  if (a.value().size() != factor.size())
    throw ShapeError("mul_constant: shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(factor.shape()));
  Tensor out = a.value();
  out.set_requires_grad(false);
  const auto f = factor.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= f[i];
  std::vector<Real> copy(f.begin(), f.end());
  return a.tape().record(std::move(out), {a}, [a, copy = std::move(copy)](Tape& tape, std::size_t self) {
    auto g = tape.grad_view(self);
    auto d = tape.grad(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * copy[i];
  });
}

}  // namespace traitgrade::ops

namespace traitgrade {

std::vector<Real> softmax(std::span<const Real> values) {
  if (values.empty()) throw ArgumentError("softmax of an empty vector");
  const Real hi = *std::max_element(values.begin(), values.end());
  std::vector<Real> out(values.size());
  Real total = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - hi);
    total += out[i];
  }
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace traitgrade
