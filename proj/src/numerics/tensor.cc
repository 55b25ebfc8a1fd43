// Copyright 2026 The Leadwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leadwise/tensor.h"

#include <unordered_set>
#include <utility>

namespace leadwise::nn {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = node_->shape;
  if (s.empty()) return 1;
  return s.back();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->values.assign(shape_size(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape.size() > 2) {
    throw ShapeError("tensors are limited to rank 2, got " +
                     shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_values({}, {value}); }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  }
  return node_->values[0];
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_values(shape(), node_->values, requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (Tensor& t : inputs) node->parents.push_back(std::move(t.node_));
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward() requires a scalar, got " +
                     shape_string(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Intermediate gradients are not needed once propagated.
  for (detail::Node* node : order) {
    if (!node->parents.empty() && node != node_.get()) node->grad.clear();
  }
}

}  // namespace leadwise::nn
