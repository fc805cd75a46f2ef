// SPDX-License-Identifier: Apache-2.0

#include "xmodal/autograd.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace xmodal::ag {
namespace {
thread_local bool grad_enabled = true;
}

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool on) { grad_enabled = on; }

template <class T>
void backward(const Var<T>& root) {
  if (!root.defined() || root.value().size() != 1)
    throw std::invalid_argument("backward requires a single-element root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversed order is a valid topological order.
  // Entries own their nodes so clearing a node's inputs cannot free a
  // child that is still queued.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (child->requires_grad && !child->is_leaf() && seen.insert(child.get()).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    if (!node->grad.empty() && node->backward_fn) node->backward_fn(*node);
    node->backward_fn = nullptr;
    node->inputs.clear();
    if (node != root.node().get()) node->grad = Tensor<T>();
    it->reset();
  }
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);

}  // namespace xmodal::ag
