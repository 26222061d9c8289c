#pragma once

// Tape-free reverse-mode differentiation over Tensor values.
//
// Every op records its inputs and a backward closure that is itself written
// in terms of differentiable ops. Running `gradients(..., create_graph=true)`
// therefore yields gradients that can be differentiated again, which the
// masked gradient penalty needs (gradient of a norm of an input-gradient).

#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fegan/core/tensor.hpp"

namespace fegan::ag {

class GradMode {
 public:
  static bool enabled() noexcept { return flag(); }
  static void set(bool on) noexcept { flag() = on; }

 private:
  static bool& flag() noexcept {
    thread_local bool on = true;
    return on;
  }
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set(on); }
  ~GradModeGuard() { GradMode::set(prev_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

struct NoGrad : GradModeGuard {
  NoGrad() : GradModeGuard(false) {}
};

template <class T>
struct Node;

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  explicit operator bool() const noexcept { return defined(); }

  const Tensor<T>& value() const { return node_->value; }
  /// Only meaningful on leaves; ops that already consumed the value keep
  /// their own references to it.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  std::int64_t size() const { return node_->value.size(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  T item() const { return node_->value.item(); }

  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <class T>
using BackwardFn =
    std::function<std::vector<Var<T>>(const Var<T>& out, const Var<T>& grad, const std::vector<bool>& needed)>;

template <class T>
struct Node {
  Tensor<T> value;
  bool requires_grad = false;
  std::vector<Var<T>> inputs;
  BackwardFn<T> backward;
  const char* op = "leaf";
};

template <class T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <class T>
Var<T> parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<T>(std::move(n));
}

template <class T>
Var<T> detach(const Var<T>& x) {
  return constant(x.value());
}

/// Wraps a computed value into a graph node when any input participates in
/// differentiation and gradient recording is on; otherwise a constant.
template <class T>
Var<T> make_op(const char* name, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = name;
  if (GradMode::enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->inputs = std::move(inputs);
      n->backward = std::move(backward);
    }
  }
  return Var<T>(std::move(n));
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

/// Gradients of `output` (seeded by `seed`, or ones) with respect to `wrt`.
/// Inputs that `output` does not depend on receive zero tensors. With
/// `create_graph` the returned gradients stay differentiable.
template <class T>
std::vector<Var<T>> gradients(const Var<T>& output, const std::vector<Var<T>>& wrt, const Var<T>& seed = {},
                              bool create_graph = false) {
  std::vector<Var<T>> result(wrt.size());
  auto zeros_for = [&](std::size_t i) { return constant(Tensor<T>::zeros(wrt[i].shape())); };
  if (!output.requires_grad()) {
    for (std::size_t i = 0; i < wrt.size(); ++i) result[i] = zeros_for(i);
    return result;
  }

  std::unordered_set<const Node<T>*> targets;
  for (const auto& w : wrt)
    if (w.defined()) targets.insert(w.node());

  // Iterative post-order DFS; `relevant` marks nodes with a path to a target.
  std::unordered_map<const Node<T>*, bool> relevant;
  std::vector<Var<T>> order;
  struct Frame {
    Var<T> var;
    std::size_t next;
  };
  std::vector<Frame> stack{{output, 0}};
  relevant.emplace(output.node(), false);
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node<T>* node = f.var.node();
    if (f.next < node->inputs.size()) {
      const Var<T>& in = node->inputs[f.next++];
      if (in.requires_grad() && !relevant.contains(in.node())) {
        relevant.emplace(in.node(), false);
        stack.push_back({in, 0});
      }
      continue;
    }
    bool rel = targets.contains(node);
    for (const auto& in : node->inputs)
      if (in.requires_grad() && relevant[in.node()]) rel = true;
    relevant[node] = rel;
    order.push_back(f.var);
    stack.pop_back();
  }

  GradModeGuard mode(create_graph);
  std::unordered_map<const Node<T>*, Var<T>> grads;
  grads[output.node()] = seed.defined() ? seed : constant(Tensor<T>::ones(output.shape()));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->node();
    auto g = grads.find(node);
    if (g == grads.end() || !relevant[node] || !node->backward) continue;
    std::vector<bool> needed(node->inputs.size());
    bool any = false;
    for (std::size_t i = 0; i < needed.size(); ++i) {
      const auto& in = node->inputs[i];
      needed[i] = in.requires_grad() && relevant[in.node()];
      any = any || needed[i];
    }
    if (!any) continue;
    Var<T> gout = g->second;
    if (!targets.contains(node)) grads.erase(g);
    std::vector<Var<T>> gin = node->backward(*it, gout, needed);
    for (std::size_t i = 0; i < gin.size(); ++i) {
      if (!needed[i] || !gin[i].defined()) continue;
      const Node<T>* key = node->inputs[i].node();
      auto [slot, inserted] = grads.try_emplace(key, gin[i]);
      if (!inserted) slot->second = add(slot->second, gin[i]);
    }
  }

  for (std::size_t i = 0; i < wrt.size(); ++i) {
    auto g = grads.find(wrt[i].node());
    result[i] = g != grads.end() ? g->second : zeros_for(i);
  }
  return result;
}

}  // namespace fegan::ag
