#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gazefuse/errors.hpp"

namespace gazefuse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

// One vertex of the define-by-run graph. Ids are handed out in creation
// order, so an op's inputs always carry smaller ids than its output and
// sorting by id is a valid topological order.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// RAII guard that disables graph recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Dense row-major double tensor that participates in reverse-mode autodiff.
///
/// Copies share the underlying node (handle semantics), like a framework
/// tensor. Values are fixed after creation; only leaves may be mutated, and
/// only through `mutable_data`, which optimizers use.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = checked_size(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = checked_size(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    const auto n = checked_size(shape);
    if (n != values.size()) {
      throw DimensionError("tensor " + shape_string(shape) + " needs " + std::to_string(n) +
                           " values, got " + std::to_string(values.size()));
    }
    return make_leaf(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    Shape shape{values.size()};
    return from(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return make_leaf({1}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::vector<double> to_vector() const { return node_->data; }

  /// Direct write access. Only valid on leaves (parameters and inputs).
  std::span<double> mutable_data() {
    if (!node_->is_leaf()) throw UsageError("mutable_data on a non-leaf tensor");
    return node_->data;
  }

  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * node_->shape.back() + c]; }

  double item() const {
    if (size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }
  std::uint64_t id() const { return node_->id; }
  const char* op() const { return node_->op; }

  /// A leaf copy of the values, cut from the graph.
  Tensor detach(bool requires_grad = false) const {
    return make_leaf(node_->shape, node_->data, requires_grad);
  }

  /// Reverse sweep from a scalar. Leaves accumulate into their grad; the
  /// interior graph is released afterwards.
  void backward() const;

  // Plumbing for op implementations.
  using NodePtr = std::shared_ptr<detail::Node>;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}
  const NodePtr& node() const { return node_; }

  /// Builds an op output. Records `backward` only when grad mode is on and
  /// some input requires grad. Rejects non-finite results.
  static Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw NumericalError(std::string("non-finite value produced by ") + op + " at flat index " +
                             std::to_string(i));
      }
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->id = detail::next_node_id();
    node->op = op;
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& t : inputs) needs = needs || t.requires_grad();
    }
    if (needs) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& t : inputs) node->inputs.push_back(t.node_);
      node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
  }

 private:
  static std::size_t checked_size(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    return shape_size(shape);
  }

  static Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericalError("non-finite value in tensor construction");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    node->id = detail::next_node_id();
    return Tensor(std::move(node));
  }

  NodePtr node_;
};

inline void Tensor::backward() const {
  if (size() != 1) throw UsageError("backward() needs a scalar loss, got " + shape_string(shape()));
  if (!node_->requires_grad) throw UsageError("backward() on a tensor that does not require grad");

  // Owning handles keep every interior node alive until the release pass.
  std::vector<NodePtr> order;
  std::vector<NodePtr> stack{node_};
  std::unordered_set<const detail::Node*> seen;
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    for (auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->id > b->id; });

  for (auto& n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;

  for (auto& n : order) {
    if (n->is_leaf()) continue;
    n->backward(*n);
  }
  for (auto& n : order) {
    if (n->is_leaf()) {
      for (double g : n->grad) {
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient reached a leaf tensor");
      }
    } else {
      n->inputs.clear();
      n->backward = nullptr;
      n->grad.clear();
      n->grad.shrink_to_fit();
      n->requires_grad = false;
    }
  }
}

}  // namespace gazefuse
