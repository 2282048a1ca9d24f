// Copyright 2026 The DENet Authors. All Rights Reserved.
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

#include <functional>
#include <memory>
#include <vector>

#include "denet/tensor.hpp"

namespace denet::ag {

struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  /// Adds `g` into this node's gradient, allocating it on first use.
  void add_grad(const Tensor& g);
  Tensor& grad_buffer();
};

/// Handle to a node of the dynamic graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void clear_grad() { node_->grad = Tensor(); }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Gradient recording is thread-local; disable it for inference.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates a result node; records parents and the backward closure only when
/// gradients are enabled and some parent requires them.
Var make_result(Tensor value, const std::vector<Var>& parents, std::function<void(Node&)> backward);

/// Accumulates gradients of the scalar `root` into every reachable node.
void backward(const Var& root);

/// Same value, cut from the graph.
Var detach(const Var& v);

}  // namespace denet::ag
