#include "docmt/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "docmt/errors.hpp"

namespace docmt {

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_size(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

std::size_t Tensor::rows() const {
  const Shape& s = node_->shape;
  if (s.empty()) return 1;
  return s.size() == 1 ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const Shape& s = node_->shape;
  if (s.empty()) return 1;
  return s.back();
}

double Tensor::item() const {
  if (node_->data.size() != 1) {
    throw DimensionError("Tensor::item on tensor of shape " + shape_str(node_->shape));
  }
  return node_->data[0];
}

std::span<const double> Tensor::grad() const {
  return node_->grad_buffer();
}

Tensor Tensor::detach() const { return from(node_->shape, node_->data); }

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (t_grad_enabled) {
    bool any = false;
    for (const Tensor& p : parents) any = any || p.node_->requires_grad;
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (Tensor& p : parents) node->parents.push_back(std::move(p.node_));
      node->backward = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

void Tensor::backward() {
  if (node_->data.size() != 1) {
    throw DimensionError("backward() requires a scalar, got shape " + shape_str(node_->shape));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion depth
  // limits.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !p->parents.empty() && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (detail::Node* n : order) {
    n->backward = nullptr;
    n->parents.clear();
  }
}

}  // namespace docmt
