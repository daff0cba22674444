#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "gradres/tensor.hpp"

namespace gradres {

enum class Activation : std::uint8_t { Tanh, Relu, Sin };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

// Scalar reference implementations, shared by the tape kernels and tests.
double activate(Activation act, double x);
double activate_derivative(Activation act, double x);
double activate_second_derivative(Activation act, double x);
double sigmoid(double x);

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Mul,
  Concat,
  SumAll,
  Act,
  ActDerivative,
  Sigmoid,
  L2Norm,
  Scale,
  AddScalar,
  Reciprocal,
};

std::string_view to_string(OpKind kind);

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::uint32_t id = 0;
  friend bool operator==(Var, Var) = default;
};

class Tape;

/// Result of a reverse sweep: one gradient per node that the loss reaches.
class Gradients {
 public:
  /// Gradient for `v`, or nullptr when `v` does not influence the loss.
  const Tensor* find(Var v) const;
  /// Gradient for `v`; zeros of the node's shape when `v` is unreachable.
  Tensor operator[](Var v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
  std::vector<Shape> shapes_;
};

/// Append-only record of primitive operations for reverse-mode
/// differentiation.
///
/// Every primitive evaluates eagerly, stores its value on the new node and
/// checks that the result is finite. Binary elementwise ops broadcast a
/// scalar, a row vector over matrix rows, or an (n x 1) column over matrix
/// columns; nothing else. A tape is confined to one thread and is meant to be
/// rebuilt for every minibatch.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Leaf whose gradient is wanted (parameters, inputs under test).
  Var variable(Tensor value);
  /// Leaf treated as a constant by backward.
  Var constant(Tensor value);
  /// Constant copy of `v`: cuts the gradient path.
  Var detach(Var v);

  /// a (m x k or k) times b (k x n), or times b^T when transpose_b (b is n x k).
  Var matmul(Var a, Var b, bool transpose_b = false);
  /// Matrix-vector product w * x for w (n x k), x (k).
  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// Concatenation along the last axis.
  Var concat(Var a, Var b);
  Var sum_all(Var a);
  Var activation(Var a, Activation act);
  Var activation_derivative(Var a, Activation act);
  Var sigmoid(Var a);
  /// Euclidean norm: a scalar for rank <= 1, an (rows x 1) column for matrices.
  Var l2_norm(Var a);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double offset);
  Var reciprocal(Var a);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse accumulation from a scalar loss.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    Activation act = Activation::Tanh;
    bool transpose_b = false;
    bool requires_grad = false;
    std::uint8_t arity = 0;
    std::uint32_t inputs[2] = {0, 0};
    double param = 0.0;
    Tensor value;
  };

  const Node& node(Var v) const;
  Var push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace gradres
