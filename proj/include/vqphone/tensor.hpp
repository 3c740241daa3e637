// Copyright 2026 The vqphone Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense real tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a shared node. Operations (see ops.hpp)
// create new nodes that remember their inputs and a backward rule whenever
// gradient recording is enabled and at least one input requires a gradient.
// Leaves created with requires_grad = true accumulate gradients across
// backward() calls until zero_grad().

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vqphone/eigen_types.hpp"

namespace vqphone {

using Shape = std::vector<Index>;

std::string shape_to_string(const Shape& shape);
Index shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  VectorXd value;
  VectorXd grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  void accumulate(const VectorXd& delta) {
    if (grad.size() == 0) {
      grad = delta;
    } else {
      grad += delta;
    }
  }
  VectorXd& grad_buffer() {
    if (grad.size() == 0) grad = VectorXd::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, VectorXd values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index dim(int axis) const;
  int rank() const { return static_cast<int>(node_->shape.size()); }
  Index numel() const { return node_->value.size(); }

  const VectorXd& data() const { return node_->value; }
  // Mutable access is for parameters and optimizers; mutating a tensor that
  // already feeds a recorded graph invalidates that graph's backward pass.
  VectorXd& data() { return node_->value; }
  double item() const;
  double operator[](Index i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return node_->grad.size() != 0; }
  // Zero-filled if nothing has been accumulated yet.
  VectorXd grad() const;
  VectorXd& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() const;

  Tensor reshape(Shape shape) const;
  // New leaf holding a copy of the values, cut from any graph.
  Tensor detach_copy() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Whether operations currently record backward rules. Thread-local.
bool grad_enabled();

// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Topologically ordered list of the recorded operations that lead to a scalar
// loss. Every op appears after all of its inputs.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  // Seeds d(loss)/d(loss) = 1 and runs backward rules in reverse order.
  // Intermediate gradients are reset first; leaf gradients accumulate.
  void backward();

  std::size_t size() const { return order_.size(); }
  std::vector<std::string> op_names() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> order_;
  std::shared_ptr<detail::Node> loss_;
};

// Convenience: Tape::record(loss).backward(). Throws DimensionError unless the
// loss has exactly one element.
void backward(const Tensor& loss);

void zero_grad(const std::vector<Tensor>& params);

}  // namespace vqphone
