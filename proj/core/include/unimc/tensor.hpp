#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace unimc {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major 64-bit real array with reverse-mode differentiation.
// Ops (see ops.hpp) link result tensors to their parents and record a
// backprop closure; backward() replays the tape in reverse topological
// order. Leaf gradients accumulate additively until zero_grad().
class Tensor {
 public:
  static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<std::size_t> shape, double value,
                        bool requires_grad = false);
  static TensorPtr from(std::vector<std::size_t> shape, std::vector<double> values,
                        bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double item() const;  // requires size() == 1

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  std::vector<double>& grad();  // allocated zero-filled on first touch
  bool has_grad() const { return !grad_.empty(); }
  void zero_grad();

  bool is_leaf() const { return parents_.empty(); }

  // Graph wiring, populated by ops. The closure receives the node itself so
  // it never has to capture a shared_ptr to it.
  std::vector<TensorPtr> parents_;
  std::function<void(Tensor&)> backprop_;

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad);

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
// loss. loss must be a finite scalar. Non-leaf gradients are scratch space
// reset on every call; leaf gradients accumulate across calls.
void backward(const TensorPtr& loss);

std::size_t shape_size(const std::vector<std::size_t>& shape);

}  // namespace unimc
