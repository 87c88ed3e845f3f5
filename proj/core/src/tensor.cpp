#include "ash/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace ash {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(d));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.raw().begin(), t.raw().end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value(): tensor is not scalar, shape " + shape_str(shape()));
  return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw std::runtime_error("grad(): no gradient present");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool v) {
  if (!node_->parents.empty()) {
    throw std::logic_error("set_requires_grad: only leaf tensors can be toggled");
  }
  node_->requires_grad = v;
  node_->needs_grad = v;
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<TensorNode>();
  n->shape = node_->shape;
  n->data = node_->data;
  return Tensor(std::move(n));
}

void Tensor::backward() const {
  if (size() != 1) throw std::invalid_argument("backward(): loss must be scalar, shape " + shape_str(shape()));
  TensorNode* root = node_.get();
  if (!root->needs_grad) return;  // no optimizable leaf feeds this value

  // Iterative post-order DFS: parents appear before their consumers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order) {
    if (n->backward_fn) {
      n->grad.assign(n->data.size(), 0.0);  // intermediate: fresh every pass
    } else if (n->grad.empty()) {
      n->grad.assign(n->data.size(), 0.0);  // leaf: allocate once, accumulate
    }
  }

  if (root->backward_fn)
    root->grad[0] = 1.0;
  else
    root->grad[0] += 1.0;  // loss is itself a leaf

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

namespace detail {

Tensor make_node(const char* op, Shape shape, std::vector<double> data) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = op;
  return Tensor(std::move(n));
}

}  // namespace detail

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  }
  for (size_t i = 0; i < sa.size(); ++i) {
    if (sa[i] != sb[i]) {
      throw ShapeError(std::string(op) + ": extent mismatch on axis " + std::to_string(i) +
                       ": " + shape_str(sa) + " vs " + shape_str(sb));
    }
  }
}

}  // namespace ash
