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

#include "vqphone/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

#include "vqphone/errors.hpp"

namespace vqphone {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return constant(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::constant(Shape shape, double value, bool requires_grad) {
  const Index n = shape_numel(shape);
  return from(std::move(shape), VectorXd::Constant(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, VectorXd values, bool requires_grad) {
  for (Index d : shape) {
    if (d < 0) throw DimensionError("Tensor", "negative extent in " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor", "shape " + shape_to_string(shape) + " holds " +
                                       std::to_string(shape_numel(shape)) + " values, got " +
                                       std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return constant({1}, value, requires_grad);
}

Index Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("Tensor::dim", "axis " + std::to_string(axis) + " out of range for " +
                                            shape_to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("Tensor::item", "tensor " + shape_to_string(shape()) + " is not a scalar");
  }
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) throw Error("set_requires_grad: only leaf tensors can be toggled");
  node_->requires_grad = on;
}

VectorXd Tensor::grad() const {
  if (node_->grad.size() == 0) return VectorXd::Zero(node_->value.size());
  return node_->grad;
}

void Tensor::zero_grad() const {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape", "cannot view " + shape_to_string(this->shape()) + " as " +
                                        shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = node_->value;
  node->op = "reshape";
  if (grad_enabled() && node_->requires_grad) {
    node->requires_grad = true;
    node->leaf = false;
    node->inputs = {node_};
    node->backward = [](detail::Node& self) { self.inputs[0]->accumulate(self.grad); };
  }
  return Tensor(std::move(node));
}

Tensor Tensor::detach_copy() const { return from(shape(), data(), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tape Tape::record(const Tensor& loss) {
  Tape tape;
  tape.loss_ = loss.node();
  if (!loss.requires_grad()) return tape;

  // Iterative post-order DFS; a node is emitted after all its inputs.
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::backward() {
  if (!loss_ || !loss_->requires_grad) return;
  for (auto& node : order_) {
    if (!node->leaf) node->grad.resize(0);
  }
  loss_->accumulate(VectorXd::Ones(1));
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.backward && node.grad.size() != 0) node.backward(node);
  }
  // Release intermediate buffers; leaves keep their accumulated gradient.
  for (auto& node : order_) {
    if (!node->leaf) node->grad.resize(0);
  }
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(order_.size());
  for (const auto& node : order_) names.emplace_back(node->op);
  return names;
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward", "loss must be a scalar, got shape " +
                                         shape_to_string(loss.shape()));
  }
  Tape::record(loss).backward();
}

void zero_grad(const std::vector<Tensor>& params) {
  for (const auto& p : params) p.zero_grad();
}

}  // namespace vqphone
