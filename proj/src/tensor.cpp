#include "bdtrack/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace bdtrack {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
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

namespace {

void validate_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::make_result(Shape shape, Buffer values, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
  }
  auto fresh = std::make_shared<detail::Node>();
  fresh->shape = std::move(shape);
  fresh->data = std::move(values);
  Tensor out(std::move(fresh));
  if (!grad_enabled()) return out;
  auto& node = *out.node_;
  for (auto& p : parents) {
    if (p.defined() && p.node_->requires_grad) node.requires_grad = true;
  }
  if (node.requires_grad) {
    node.parents.reserve(parents.size());
    for (auto& p : parents) node.parents.push_back(p.node_);
    node.backward = std::move(backward);
  }
  return out;
}

const detail::Node& Tensor::checked() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().data.size(); }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() {
  checked();
  if (node_->backward) throw std::logic_error("mutable_data on a recorded operation result");
  return node_->data;
}

double Tensor::item() const {
  const auto& n = checked();
  if (n.data.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(n.shape));
  return n.data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& n = checked();
  if (index.size() != n.shape.size()) throw DimensionError("index rank mismatch for " + shape_str(n.shape));
  std::size_t flat = 0;
  std::size_t i = 0;
  for (auto v : index) {
    if (v >= n.shape[i]) throw DimensionError("index out of range for " + shape_str(n.shape));
    flat = flat * n.shape[i] + v;
    ++i;
  }
  return n.data[flat];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  checked();
  if (node_->backward) throw std::logic_error("set_requires_grad on a recorded operation result");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) return std::vector<double>(n.data.size(), 0.0);
  return {n.grad.begin(), n.grad.end()};
}

std::span<double> Tensor::mutable_grad() {
  checked();
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  checked();
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  const auto& root = checked();
  if (root.data.size() != 1) throw DimensionError("backward() requires a scalar, got " + shape_str(root.shape));
  if (!root.requires_grad) return;

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward) {
      n->grad.assign(n->data.size(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor Tensor::detach() const { return clone(false); }

Tensor Tensor::clone(bool requires_grad) const {
  auto node = std::make_shared<detail::Node>();
  node->shape = checked().shape;
  node->data = node_->data;
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

namespace {
thread_local std::uint64_t g_macs = 0;
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::uint64_t MacCounter::value() { return g_macs; }
void MacCounter::reset() { g_macs = 0; }
void MacCounter::add(std::uint64_t macs) { g_macs += macs; }

}  // namespace bdtrack
