#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "regemb/errors.hpp"
#include "regemb/rng.hpp"

namespace regemb {

namespace detail {

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation
};

}  // namespace detail

/// Dense row-major double tensor. Value-semantic handle onto a shared node so
/// that recorded operations and their backward closures alias the same
/// storage. A tensor is immutable once produced by an operation; parameter
/// tensors are mutated in place only by the optimizer between steps.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> data,
         bool requires_grad = false);
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0,
                  bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor ones(std::vector<std::size_t> shape, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t dim(std::size_t axis) const;

  std::vector<double>& values() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }
  double* data() { return node_->data.data(); }
  const double* data() const { return node_->data.data(); }

  /// Value of a single-element tensor.
  double item() const;
  double at(std::initializer_list<std::size_t> idx) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient buffer, allocated (zero-filled) on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad_view() const;
  void zero_grad();

  /// True when the two handles alias the same node.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const void* node_id() const { return node_.get(); }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of the backward closures of executed differentiable
/// operations. Operations append themselves as they run, so the record is
/// topologically ordered by construction; the backward pass replays it in
/// exact reverse. A tape may be consumed by backward() once; a second call
/// without reset() throws.
class Tape {
 public:
  void record(std::function<void()> backward_fn);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  /// Seeds d(loss)/d(loss) = 1 (loss must be a single-element tensor) and
  /// runs every recorded closure in reverse order.
  void backward(Tensor loss);

  /// Seeds an arbitrary cotangent on `output` and runs the backward pass.
  void backward_from(Tensor output, const std::vector<double>& seed);

  /// Clears all entries and the consumed flag.
  void reset();

 private:
  std::vector<std::function<void()>> entries_;
  bool consumed_ = false;
};

/// Glorot/fan-based uniform initialization: U(-a, a), a = sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng, bool requires_grad = true);

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace regemb
