// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over Tensor<T>. A Var is a
// shared handle to a graph node; operations record their inputs and a
// backward closure only while gradient recording is enabled and at least one
// input requires a gradient.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal::ag {

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  /// Gradient buffer, zero-initialised on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty() && value.size() > 0) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool is_leaf() const { return !backward_fn; }
};

/// Thread-local switch for graph recording.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  static Var scalar(T v, bool requires_grad = false) {
    return Var(Tensor<T>({1}, v), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  /// Direct access for parameter updates and finite-difference probes.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  T item() const { return node_->value[0]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  /// New leaf sharing no history with this one.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Wraps an op result, attaching history when recording applies.
template <class T>
Var<T> make_result(Tensor<T> value, const std::vector<Var<T>>& inputs,
                   std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (GradMode::enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& in : inputs) node->inputs.push_back(in.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var<T>(std::move(node));
}

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires a
/// gradient. The root must hold a single element. Interior history is
/// released as it is consumed.
template <class T>
void backward(const Var<T>& root);

}  // namespace xmodal::ag
