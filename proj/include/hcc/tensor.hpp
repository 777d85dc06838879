// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <vector>

namespace hcc {

// Error taxonomy. The CLI maps these onto stable exit codes, so new error
// conditions should reuse one of the existing categories.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or axis mismatch between tensors.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value (hyperparameters, flags, argument ranges).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Runtime data is unusable (non-finite values, too few tokens, ...).
struct InputError : Error {
  explicit InputError(const std::string& msg) : Error(msg) {}
};

// Serialized artifact is malformed or inconsistent with its manifest.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Optimization diverged.
struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

inline void check_shape_valid(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}

// Reductions and dot products accumulate in a type at least as wide as
// double, so float32 tensors keep enough precision for oracle comparisons.
template <typename T>
using accum_t = std::conditional_t<std::is_same_v<T, float>, double, T>;

template <typename T>
class Tensor;

namespace detail {

// One node of the computation graph. Tensor is a cheap handle around this.
// Values are immutable after the producing op finishes; only `grad` mutates.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;          // allocated lazily, same length as data
  bool requires_grad = false;   // true if this node or any ancestor is a trainable leaf
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;  // accumulates this->grad into parents' grads

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

// Dense row-major tensor handle with optional participation in a reverse-mode
// gradient tape. Copying a Tensor copies the handle, not the buffer.
template <typename T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "Tensor supports float32 and float64 elements");

 public:
  using Node = detail::Node<T>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    check_shape_valid(shape);
    node_->shape = std::move(shape);
    node_->data.assign(numel(node_->shape), T(0));
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::initializer_list<T> data, bool requires_grad = false)
      : Tensor(std::move(shape), std::vector<T>(data), requires_grad) {}

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    check_shape_valid(shape);
    if (numel(shape) != data.size()) {
      throw DimensionError("data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }

  const std::vector<T>& data() const { return node_->data; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  T item() const {
    if (size() != 1) throw DimensionError("item() requires a scalar, got " + shape_str(shape()));
    return node_->data[0];
  }

  // 2-d accessors used throughout the layer code.
  T at(std::size_t r, std::size_t c) const {
    return node_->data[r * node_->shape[1] + c];
  }
  T at(std::size_t i) const { return node_->data[i]; }

  bool all_finite() const {
    for (T v : node_->data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  // In-place value mutation; reserved for parameter construction, loading and
  // optimizer steps. Never call on a tensor that a tape node already consumed.
  std::vector<T>& mutable_data() { return node_->data; }

  void zero_grad() { node_->grad.clear(); }

  void accumulate_grad(const std::vector<T>& g) {
    node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
  }

  // Constant copy severed from the tape.
  Tensor detach() const {
    Tensor out;
    out.node_ = std::make_shared<Node>();
    out.node_->shape = node_->shape;
    out.node_->data = node_->data;
    return out;
  }

  // Reverse-mode sweep from a scalar root. Leaf gradients accumulate across
  // calls until zero_grad(); interior gradients are scratch per sweep.
  void backward() const {
    if (size() != 1) {
      throw DimensionError("backward() requires a scalar root, got " + shape_str(shape()));
    }
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    topo(node_.get(), seen, order);
    for (Node* n : order) {
      if (n != node_.get() && !n->parents.empty()) n->grad.assign(n->data.size(), T(0));
    }
    node_->grad.assign(1, T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backfn) (*it)->backfn(**it);
    }
  }

  // --- graph construction (used by ops.hpp) -------------------------------

  static Tensor make_op(Shape shape, std::vector<T> data,
                        std::vector<Tensor> parents,
                        std::function<void(Node&)> backfn) {
    Tensor out(std::move(shape), std::move(data));
    bool needs = false;
    for (const Tensor& p : parents) needs = needs || p.requires_grad();
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->parents.reserve(parents.size());
      for (Tensor& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backfn = std::move(backfn);
    }
    return out;
  }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  static void topo(Node* n, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
    // Iterative DFS; graphs from long training loops overflow the stack otherwise.
    struct Frame {
      Node* node;
      std::size_t next_parent;
    };
    std::vector<Frame> stack{{n, 0}};
    seen.insert(n);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next_parent < f.node->parents.size()) {
        Node* p = f.node->parents[f.next_parent++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(f.node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> node_;
};

}  // namespace hcc
