#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "genft/activation.hpp"
#include "genft/matrix.hpp"

namespace genft {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
};

/// Reverse-mode tape over dense matrices.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// Only nodes that depend on a leaf carry gradients; gradient contributions
/// from a node used several times are summed.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (a trainable parameter or a checked variable).
  Var leaf(Matrix value);
  /// Non-differentiable input (frozen weights, data, masks).
  Var constant(Matrix value);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of the last backward() loss with respect to `v`. Leaves not
  /// reachable from the loss report a zero matrix of their shape.
  const Matrix& grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node. The loss must
  /// be 1x1 (ContractError otherwise). Can be called again after new nodes
  /// are added; previous gradients are discarded.
  void backward(Var loss);

  // Op constructors. Public so the free functions below can build nodes.
  enum class Op {
    leaf,
    constant,
    matmul,
    transpose,
    add,
    sub,
    scale,
    hadamard,
    activation,
    sum,
    add_column,
    mean_squared_error,
    cross_entropy,
  };

  struct Node {
    Op op = Op::constant;
    std::size_t in0 = 0;
    std::size_t in1 = 0;
    double scalar = 0.0;
    Activation act = Activation::identity;
    Matrix value;
    Matrix aux;
    Matrix grad;
    bool requires_grad = false;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_.at(v.id); }

 private:
  void accumulate(std::size_t id, const Matrix& g);

  std::deque<Node> nodes_;  // stable references across push()
  bool has_grads_ = false;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var activate(Activation act, Var x);
/// Sum of all entries, 1x1.
Var sum(Var a);
/// m (R x C) + bias (R x 1) broadcast over columns.
Var add_column(Var m, Var bias);
/// mean((pred - target)^2) over all entries, 1x1. `target` is treated as a
/// constant.
Var mean_squared_error(Var pred, Var target);
/// Softmax cross-entropy over the rows of `logits` (classes x samples),
/// averaged over samples, with uniform label smoothing in [0, 1).
Var cross_entropy(Var logits, std::span<const std::size_t> labels, double label_smoothing);

}  // namespace genft
