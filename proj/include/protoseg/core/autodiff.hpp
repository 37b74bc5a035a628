#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "protoseg/core/error.hpp"
#include "protoseg/core/tensor.hpp"

namespace protoseg::ad {

// Reverse-mode autodiff over a dynamically built graph. Each op allocates a
// node holding its forward value plus a closure that routes the node's
// gradient into its parents. backward() walks the graph once in reverse
// topological order, so shared subgraphs (fused trunks, shared prototypes)
// accumulate gradients from every consumer.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
void ensure_grad(Node<T>& n) {
  if (n.grad.numel() != n.value.numel()) n.grad = Tensor<T>::zeros_like(n.value);
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->requires_grad |= p->requires_grad;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

// Reverse topological order from root (iterative post-order DFS; parent order
// is fixed at op creation, so traversal is deterministic).
template <typename T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; iterate in reverse for backprop
}

// Backpropagate from a scalar root.
template <typename T>
void backward(const Var<T>& root) {
  if (root->value.numel() != 1)
    throw ValidationError("backward() expects a scalar root");
  if (!root->requires_grad) return;
  auto order = topo_order(root);
  ensure_grad(*root);
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop && n->grad.numel() == n->value.numel()) n->backprop(*n);
  }
}

}  // namespace protoseg::ad
