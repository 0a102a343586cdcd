#pragma once

// Minimal reverse-mode automatic differentiation over Tensor values.
//
// A Var is a shared handle to a graph node. Ops build the graph eagerly
// while gradient recording is enabled and at least one input requires a
// gradient; otherwise they return plain leaves. `backward()` walks the
// graph in reverse topological order and accumulates into `grad()`.

#include <functional>
#include <memory>
#include <vector>

#include "uranker/tensor.hpp"

namespace uranker::ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Tensor value;
  Tensor grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  /// Gradient storage, zero-initialised on first use.
  Tensor& grad_buffer();
  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const;
  /// For optimizers and checkpoint loading; never call on graph intermediates.
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  Index dim(int i) const { return value().dim(i); }
  Index numel() const { return value().numel(); }
  double item() const { return value().item(); }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  const Tensor& grad() const;
  void zero_grad();

  /// Seeds d(self)/d(self) = 1; self must hold one element.
  void backward() const;
  void backward(const Tensor& seed) const;

  /// Same value, cut from the graph.
  Var detach() const { return Var(value(), false); }

  Node* node() const noexcept { return node_.get(); }
  const NodePtr& node_ptr() const noexcept { return node_; }

 private:
  NodePtr node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Wraps `value` as the result of an op. The backward closure is kept only
/// when recording is on and some input needs a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward);

}  // namespace uranker::ag
