#include "uranker/autograd.hpp"

#include <unordered_set>

#include "uranker/errors.hpp"

namespace uranker::ag {

namespace {
thread_local bool t_grad_enabled = true;
}

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (g.numel() != value.numel()) {
    throw ShapeError("gradient " + to_string(g.shape()) + " does not match value " + to_string(value.shape()));
  }
  Tensor& buf = grad_buffer();
  for (Index i = 0; i < buf.numel(); ++i) buf[i] += g[i];
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::value() const {
  if (!node_) throw InvalidInput("access to undefined Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw InvalidInput("access to undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

void Var::set_requires_grad(bool on) {
  if (!node_) throw InvalidInput("access to undefined Var");
  node_->requires_grad = on;
}

bool Var::has_grad() const { return node_ && node_->grad.numel() == node_->value.numel() && !node_->grad.empty(); }

const Tensor& Var::grad() const {
  if (!node_) throw InvalidInput("access to undefined Var");
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

void Var::backward() const {
  if (numel() != 1) throw ShapeError("backward() without seed needs a scalar, got " + to_string(shape()));
  backward(Tensor(shape(), 1.0));
}

void Var::backward(const Tensor& seed) const {
  if (!node_) throw InvalidInput("backward on undefined Var");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the reachable graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Var make_op(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs = false;
  if (t_grad_enabled) {
    for (const Var& v : inputs) needs = needs || v.requires_grad();
  }
  if (!needs) return Var(std::move(value), false);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (Var& v : inputs) {
    // Undefined inputs (optional bias) are kept as placeholders so indices stay stable.
    node->inputs.push_back(v.defined() ? v.node_ptr() : std::make_shared<Node>());
  }
  node->backward = std::move(backward);
  return Var(std::move(node));
}

}  // namespace uranker::ag
