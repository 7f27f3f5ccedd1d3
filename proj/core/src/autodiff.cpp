#include "barfiq/autodiff.hpp"

#include <unordered_set>

#include "barfiq/errors.hpp"

namespace barfiq {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&, std::vector<Tensor*>&)> grad_fn;

  Tensor& grad_buffer() {
    if (!has_grad) {
      grad = Tensor(value.rows(), value.cols());
      has_grad = true;
    }
    return grad;
  }
};

}  // namespace detail

namespace {
const Tensor& empty_tensor() {
  static const Tensor t;
  return t;
}
}  // namespace

const Tensor& Var::value() const { return node_ ? node_->value : empty_tensor(); }

const Tensor& Var::grad() const {
  if (!node_) return empty_tensor();
  return node_->grad_buffer();
}

Tensor& Var::mutable_value() {
  if (!node_) throw ShapeError("mutable_value on empty Var");
  return node_->value;
}

Tensor& Var::mutable_grad() {
  if (!node_) throw ShapeError("mutable_grad on empty Var");
  return node_->grad_buffer();
}

void Var::zero_grad() {
  if (node_ && node_->has_grad) node_->grad.fill(0.0);
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

double Var::item() const {
  if (value().size() != 1) throw ShapeError("item() on non-scalar " + value().shape_string());
  return value()[0];
}

Var constant(Tensor value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Tensor&, std::vector<Tensor*>&)> grad_fn) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  for (auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->grad_fn = std::move(grad_fn);
  return Var(std::move(n));
}

void backward(const Var& root, double seed) {
  if (!root) throw ShapeError("backward on empty Var");
  if (root.value().size() != 1) {
    throw ShapeError("backward root must be 1x1, got " + root.value().shape_string());
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS over nodes that require gradients.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += seed;
  std::vector<Tensor*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (!node->grad_fn || !node->has_grad) continue;
    parent_grads.clear();
    for (auto& p : node->parents) {
      parent_grads.push_back(p->requires_grad ? &p->grad_buffer() : nullptr);
    }
    node->grad_fn(node->grad, parent_grads);
  }
  // Interior gradients are not needed after the sweep; leaves keep theirs.
  for (detail::Node* node : order) {
    if (!node->parents.empty()) {
      node->grad = Tensor();
      node->has_grad = false;
    }
  }
}

}  // namespace barfiq
