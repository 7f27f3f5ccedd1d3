#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "barfiq/tensor.hpp"

namespace barfiq {

namespace detail {
struct Node;
}

/// Handle to a node of a reverse-mode computation graph.
///
/// A graph is built by calling the functions in `barfiq::ops` on Vars; it is
/// freed when the last handle to its output goes away. Parameters are leaf
/// Vars created with `parameter()`; their gradients accumulate across
/// `backward()` calls until `zero_grad()`.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Gradient accumulated by backward(); a zero tensor of the value's shape
  // if nothing has flowed into this node yet.
  const Tensor& grad() const;
  // Direct access for optimizers and finite-difference probes. Only valid on
  // leaves; mutating an interior node does not re-run its consumers.
  Tensor& mutable_value();
  Tensor& mutable_grad();
  void zero_grad();

  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const;

  explicit operator bool() const { return node_ != nullptr; }

  // Graph internals; used by make_op/backward.
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

/// Builds an interior node. `grad_fn(out_grad, parent_grads)` must add the
/// vector-Jacobian product into each non-null parent gradient (null means
/// that parent does not require a gradient).
Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(const Tensor&, std::vector<Tensor*>&)> grad_fn);

/// Reverse sweep from a 1×1 root, seeding d(root) = seed.
void backward(const Var& root, double seed = 1.0);

}  // namespace barfiq
