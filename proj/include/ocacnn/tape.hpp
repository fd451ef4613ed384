#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "ocacnn/tensor.hpp"

namespace ocacnn {

template <typename T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t index) : tape_(tape), index_(index) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t index() const noexcept { return index_; }
  const BasicTensor<T>& value() const { return tape_->value(index_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(index_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// every input index is smaller than the index of the node that consumes it.
template <typename T>
class Tape {
 public:
  using TensorT = BasicTensor<T>;
  /// Receives the gradient flowing into the node's output and accumulates into
  /// its inputs through grad_buffer().
  using BackwardFn = std::function<void(Tape&, const TensorT& grad_out)>;

  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    TensorT value;
    TensorT grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(TensorT value, bool requires_grad = true) {
    nodes_.push_back(Node{"leaf", {}, std::move(value), {}, {}, requires_grad});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> constant(TensorT value) { return leaf(std::move(value), false); }

  /// Appends an operation node. The backward closure is dropped when none of
  /// the inputs needs a gradient.
  Var<T> record(std::string_view op, std::initializer_list<Var<T>> inputs, TensorT value,
                BackwardFn backward) {
    Node node;
    node.op = std::string(op);
    node.value = std::move(value);
    for (const Var<T>& v : inputs) {
      if (&v.tape() != this) throw ContractError("operation mixes nodes from different tapes");
      node.inputs.push_back(v.index());
      node.requires_grad = node.requires_grad || nodes_[v.index()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Reverse sweep from a scalar root. Nodes the root does not depend on keep
  /// a zero gradient.
  void backward(Var<T> root) {
    const std::size_t r = root.index();
    if (nodes_.at(r).value.size() != 1) {
      throw ContractError("backward root must be a scalar, got shape " +
                          shape_str(nodes_[r].value.shape()));
    }
    for (Node& n : nodes_) n.grad = TensorT();
    grad_buffer(r)[0] = T{1};
    for (std::size_t i = r + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const TensorT& value(std::size_t i) const { return nodes_.at(i).value; }
  bool requires_grad(std::size_t i) const { return nodes_.at(i).requires_grad; }

  /// Gradient of the last backward() root with respect to node i.
  TensorT grad(std::size_t i) const {
    const Node& n = nodes_.at(i);
    return n.grad.empty() ? TensorT(n.value.shape()) : n.grad;
  }
  TensorT grad(Var<T> v) const { return grad(v.index()); }

  /// Zero-initialized on first use.
  std::span<T> grad_buffer(std::size_t i) {
    Node& n = nodes_.at(i);
    if (n.grad.empty()) n.grad = TensorT(n.value.shape());
    return n.grad.data();
  }

  void accumulate(std::size_t i, std::span<const T> g) {
    auto dst = grad_buffer(i);
    if (dst.size() != g.size()) throw ShapeError("gradient size mismatch on node " + std::to_string(i));
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
  }

 private:
  std::vector<Node> nodes_;
};

}  // namespace ocacnn
