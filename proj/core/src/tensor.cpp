#include "regemb/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace regemb {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  node_->data.assign(shape_size(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::ones(std::vector<std::size_t> shape, bool requires_grad) {
  return Tensor(std::move(shape), 1.0, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(node_->shape));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != rank()) {
    throw DimensionError("index rank mismatch for shape " + shape_str(shape()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    if (i >= node_->shape[axis]) {
      throw DimensionError("index out of bounds for shape " + shape_str(shape()));
    }
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad_view() const {
  if (node_->grad.empty()) {
    throw Error("gradient requested but never accumulated");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tape::record(std::function<void()> backward_fn) {
  entries_.push_back(std::move(backward_fn));
}

void Tape::backward(Tensor loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward() requires a single-element loss, got shape " +
                         shape_str(loss.shape()));
  }
  backward_from(std::move(loss), {1.0});
}

void Tape::backward_from(Tensor output, const std::vector<double>& seed) {
  if (consumed_) {
    throw Error("tape already consumed by a backward pass; reset() before reuse");
  }
  if (seed.size() != output.size()) {
    throw DimensionError("backward seed length " + std::to_string(seed.size()) +
                         " does not match output shape " +
                         shape_str(output.shape()));
  }
  consumed_ = true;
  auto& g = output.grad();
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out, Rng& rng, bool requires_grad) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(shape_size(shape));
  for (auto& x : data) x = rng.uniform(-a, a);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

}  // namespace regemb
