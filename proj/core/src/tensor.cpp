#include "traitgrade/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "traitgrade/errors.hpp"

namespace traitgrade {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensors must be 1-D or 2-D, got " + to_string(shape));
  for (auto d : shape)
    if (d == 0) throw ShapeError("dimension sizes must be positive, got " + to_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != product(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
  return Tensor({rows, cols}, std::vector<Real>(values));
}

Tensor Tensor::vector(std::initializer_list<Real> values) {
  return Tensor({values.size()}, std::vector<Real>(values));
}

std::size_t Tensor::rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

Real Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return data_[0];
}

std::span<Real> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), Real{0});
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), Real{0}); }

void zero_grads(std::span<Tensor* const> params) {
  for (auto* p : params) p->zero_grad();
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  if (auto it = bound_ids_.find(&param); it != bound_ids_.end()) return {this, it->second};
  Node node;
  node.bound = &param;
  node.needs_grad = param.requires_grad();
  nodes_.push_back(std::move(node));
  bound_ids_.emplace(&param, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw ArgumentError("operation mixes values from different tapes");
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const auto& node = nodes_[id];
  return node.bound ? *node.bound : node.value;
}

std::span<Real> Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  const std::size_t n = node.bound ? node.bound->size() : node.value.size();
  if (node.grad.size() != n) node.grad.assign(n, Real{0});
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ArgumentError("backward() on a value from another tape");
  if (!loss.value().is_scalar())
    throw ArgumentError("backward() requires a scalar loss, got shape " + to_string(loss.shape()));

  for (auto& node : nodes_) node.grad.clear();
  grad(loss.id())[0] = Real{1};

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) {
      node.backward(*this, i);
    } else if (node.bound && node.needs_grad) {
      auto dst = node.bound->grad();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

}  // namespace traitgrade
