#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace traitgrade {

#ifdef TRAITGRADE_FLOAT32
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

// Dense row-major array with an optional gradient slot.
//
// One-dimensional tensors of length n behave as 1 x n row vectors wherever an
// operation needs a matrix view.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<Real> values);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor scalar(Real value) { return Tensor({1}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  bool is_scalar() const noexcept { return data_.size() == 1; }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  Real item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool has_grad() const noexcept { return !grad_.empty(); }
  // Allocates a zeroed gradient buffer on first access.
  std::span<Real> grad();
  std::span<const Real> grad() const noexcept { return grad_; }
  void zero_grad();

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
  bool requires_grad_ = false;
};

void zero_grads(std::span<Tensor* const> params);

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape. Every operation appends a node holding its value and
// a closure that propagates the node's gradient to its inputs.
//
// Parameters are bound by pointer; their gradients accumulate into the Tensor's own
// grad slot when backward() finishes, so repeated backward calls add up until
// zero_grads().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binding the same tensor twice returns the same node.
  Var parameter(Tensor& param);

  // Called with the tape and the id of the node being differentiated.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  // Appends a node whose inputs are `inputs`. `backward` is only recorded when at
  // least one input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated on first use.
  std::span<Real> grad(std::size_t id);
  std::span<const Real> grad_view(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor* bound = nullptr;
    std::vector<Real> grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> bound_ids_;
};

}  // namespace traitgrade
