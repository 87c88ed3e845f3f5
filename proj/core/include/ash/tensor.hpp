#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ash {

/// Thrown when tensor shapes do not satisfy an operation's contract.
/// The message names the offending axis.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One node of the compute graph: cached forward output, parent references
/// and the local gradient closure recorded by the op that produced it.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  // Leaves accumulate across backward() calls; intermediates are reset at the
  // start of every pass. Empty until the first backward that reaches the node.
  std::vector<double> grad;
  bool requires_grad = false;  // optimizable leaf
  bool needs_grad = false;     // reachable from some requires_grad leaf
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward_fn;  // null for leaves
  const char* op = "leaf";

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

/// Dense n-dimensional double tensor with reverse-mode gradients.
/// Value-semantics handle onto a shared graph node; ops on tensors record
/// themselves so that backward() on a scalar loss fills in leaf gradients.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return node_->numel(); }
  int dim(int axis) const { return node_->shape.at(axis); }

  const std::vector<double>& values() const { return node_->data; }
  std::vector<double>& raw() { return node_->data; }
  double value() const;  // scalar fetch, throws on non-scalar

  bool requires_grad() const { return node_->requires_grad; }
  bool needs_grad() const { return node_->needs_grad; }
  /// Leaf tensors only: toggles participation in backward passes.
  void set_requires_grad(bool v);
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Copy of the data as a fresh constant leaf, cut off from the graph.
  Tensor detach() const;

  /// Reverse-mode pass from a scalar loss. Visits each reachable node once in
  /// reverse topological order; leaf gradients accumulate (+=) across calls,
  /// intermediate gradients are recomputed from scratch every call.
  void backward() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Graph recording is on by default; evaluation-only code can suspend it.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

/// True when the op must record a backward closure for these inputs.
inline bool track(const Tensor& a) { return grad_enabled() && a.needs_grad(); }
inline bool track(const Tensor& a, const Tensor& b) {
  return grad_enabled() && (a.needs_grad() || b.needs_grad());
}
inline bool track(const Tensor& a, const Tensor& b, const Tensor& c) {
  return grad_enabled() && (a.needs_grad() || b.needs_grad() || c.needs_grad());
}

Tensor make_node(const char* op, Shape shape, std::vector<double> data);

}  // namespace detail

void check_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace ash
