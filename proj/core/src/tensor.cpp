#include "unimc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "unimc/errors.hpp"

namespace unimc {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values,
               bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {}

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> values(shape_size(shape), 0.0);
  return TensorPtr(new Tensor(std::move(shape), std::move(values), requires_grad));
}

TensorPtr Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  std::vector<double> values(shape_size(shape), value);
  return TensorPtr(new Tensor(std::move(shape), std::move(values), requires_grad));
}

TensorPtr Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                       bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw NumericError(ErrorCode::kShapeMismatch,
                       "value count " + std::to_string(values.size()) +
                           " does not match shape size " +
                           std::to_string(shape_size(shape)));
  }
  return TensorPtr(new Tensor(std::move(shape), std::move(values), requires_grad));
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return TensorPtr(new Tensor({1}, {value}, requires_grad));
}

double Tensor::item() const {
  if (size() != 1) {
    throw NumericError(ErrorCode::kNonScalarLoss,
                       "item() on tensor of size " + std::to_string(size()));
  }
  return values_[0];
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

void backward(const TensorPtr& loss) {
  if (!loss || loss->size() != 1) {
    throw NumericError(ErrorCode::kNonScalarLoss, "backward needs a scalar loss");
  }
  if (!std::isfinite(loss->item())) {
    throw NumericError(ErrorCode::kNonFiniteLoss, "backward on non-finite loss");
  }

  // Iterative DFS over parents, deterministic order.
  std::vector<Tensor*> topo;
  std::unordered_set<Tensor*> visited;
  struct Frame {
    Tensor* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& frame = stack.back();
    if (frame.next_parent < frame.node->parents_.size()) {
      Tensor* parent = frame.node->parents_[frame.next_parent].get();
      ++frame.next_parent;
      if (visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      topo.push_back(frame.node);
      stack.pop_back();
    }
  }

  // Non-leaf grads are scratch for this pass; leaves keep accumulating.
  for (Tensor* node : topo) {
    if (!node->is_leaf()) {
      node->grad();
      node->zero_grad();
    }
  }
  loss->grad()[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Tensor* node = *it;
    if (node->backprop_) node->backprop_(*node);
  }
}

}  // namespace unimc
