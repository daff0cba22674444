#include "gradres/tape.hpp"

#include <Eigen/Core>
#include <cassert>
#include <cmath>
#include <string>

namespace gradres {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

// How a smaller operand maps onto the output of a binary elementwise op.
enum class Broadcast { Same, Scalar, Row, Col };

Broadcast broadcast_kind(const Shape& out, const Shape& operand) {
  if (operand == out) return Broadcast::Same;
  const std::size_t n = shape_size(operand);
  if (n == 1) return Broadcast::Scalar;
  if (out.size() == 2) {
    const bool row_vector = (operand.size() == 1 && operand[0] == out[1]) ||
                            (operand.size() == 2 && operand[0] == 1 && operand[1] == out[1]);
    if (row_vector) return Broadcast::Row;
    if (operand.size() == 2 && operand[0] == out[0] && operand[1] == 1) return Broadcast::Col;
  }
  if (shape_size(out) == n) return Broadcast::Same;  // (n) vs (1 x n)
  throw ShapeError("cannot broadcast " + shape_string(operand) + " to " + shape_string(out));
}

// Row and column strides of an operand read in output coordinates.
struct Strides {
  std::size_t row;
  std::size_t col;
};

Strides strides_of(Broadcast b, std::size_t cols) {
  switch (b) {
    case Broadcast::Same: return {cols, 1};
    case Broadcast::Scalar: return {0, 0};
    case Broadcast::Row: return {0, 1};
    case Broadcast::Col: return {1, 0};
  }
  return {0, 0};
}

template <typename Op>
void binary_apply(Tensor& out, const Tensor& a, Broadcast ba, const Tensor& b, Broadcast bb, Op op) {
  const std::size_t rows = out.rows(), cols = out.cols();
  double* po = out.data().data();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (ba == Broadcast::Same && bb == Broadcast::Same) {
    for (std::size_t i = 0; i < rows * cols; ++i) po[i] = op(pa[i], pb[i]);
    return;
  }
  const Strides sa = strides_of(ba, cols), sb = strides_of(bb, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ra = pa + r * sa.row;
    const double* rb = pb + r * sb.row;
    double* ro = po + r * cols;
    for (std::size_t c = 0; c < cols; ++c) ro[c] = op(ra[c * sa.col], rb[c * sb.col]);
  }
}

const Shape& larger_shape(const Tensor& a, const Tensor& b) {
  return a.size() >= b.size() ? a.shape() : b.shape();
}

// Accumulates `grad` (shaped like the output) into `target` (shaped like the
// operand), summing over broadcast axes. `factor`, when given, multiplies
// elementwise in output coordinates.
void reduce_into(Tensor& target, const Tensor& grad, Broadcast b, const Tensor* factor,
                 Broadcast factor_b) {
  const std::size_t rows = grad.rows();
  const std::size_t cols = grad.cols();
  const Strides st = strides_of(b, cols), sf = strides_of(factor_b, cols);
  double* pt = target.data().data();
  const double* pg = grad.data().data();
  const double* pf = factor ? factor->data().data() : nullptr;
  for (std::size_t r = 0; r < rows; ++r) {
    double* rt = pt + r * st.row;
    const double* rg = pg + r * cols;
    if (pf) {
      const double* rf = pf + r * sf.row;
      for (std::size_t c = 0; c < cols; ++c) rt[c * st.col] += rg[c] * rf[c * sf.col];
    } else {
      for (std::size_t c = 0; c < cols; ++c) rt[c * st.col] += rg[c];
    }
  }
}

void accumulate(std::optional<Tensor>& slot, Tensor contribution) {
  if (!slot) {
    slot = std::move(contribution);
    return;
  }
  auto dst = slot->data();
  auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sin: return "sin";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sin") return Activation::Sin;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Sin: return std::sin(x);
  }
  return 0.0;
}

// relu'(0) is taken as 0.
double activate_derivative(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sin: return std::cos(x);
  }
  return 0.0;
}

double activate_second_derivative(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Relu: return 0.0;
    case Activation::Sin: return -std::sin(x);
  }
  return 0.0;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Concat: return "concat";
    case OpKind::SumAll: return "sum_all";
    case OpKind::Act: return "activation";
    case OpKind::ActDerivative: return "activation_derivative";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::L2Norm: return "l2_norm";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Reciprocal: return "reciprocal";
  }
  return "?";
}

const Tensor* Gradients::find(Var v) const {
  if (v.id >= grads_.size() || !grads_[v.id]) return nullptr;
  return &*grads_[v.id];
}

Tensor Gradients::operator[](Var v) const {
  if (const Tensor* g = find(v)) return *g;
  if (v.id >= shapes_.size()) throw std::out_of_range("gradient requested for unknown node");
  return Tensor(shapes_[v.id]);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("Var does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite result from ") + std::string(to_string(n.kind)));
  }
  for (std::uint8_t i = 0; i < n.arity; ++i) {
    if (nodes_[n.inputs[i]].requires_grad) n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::detach(Var v) { return constant(value(v)); }

const Tensor& Tape::value(Var v) const { return node(v).value; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }
OpKind Tape::kind(Var v) const { return node(v).kind; }

Var Tape::matmul(Var a, Var b, bool transpose_b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() == 0 || tb.rank() != 2) {
    throw ShapeError("matmul expects a vector/matrix times a matrix, got " +
                     shape_string(ta.shape()) + " and " + shape_string(tb.shape()));
  }
  const std::size_t k = ta.cols();
  const std::size_t b_inner = transpose_b ? tb.shape()[1] : tb.shape()[0];
  const std::size_t n_out = transpose_b ? tb.shape()[0] : tb.shape()[1];
  if (k != b_inner) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(ta.shape()) +
                     (transpose_b ? " x T" : " x ") + shape_string(tb.shape()));
  }
  Node n;
  n.kind = OpKind::MatMul;
  n.arity = 2;
  n.inputs[0] = a.id;
  n.inputs[1] = b.id;
  n.transpose_b = transpose_b;
  n.value = ta.rank() == 1 ? Tensor(Shape{n_out}) : Tensor(Shape{ta.rows(), n_out});
  auto out = as_matrix(n.value);
  if (transpose_b) {
    out.noalias() = as_matrix(ta) * as_matrix(tb).transpose();
  } else {
    out.noalias() = as_matrix(ta) * as_matrix(tb);
  }
  return push(std::move(n));
}

Var Tape::matvec(Var w, Var x) {
  if (value(x).rank() != 1) throw ShapeError("matvec expects a vector operand");
  return matmul(x, w, /*transpose_b=*/true);
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const Shape out_shape = larger_shape(ta, tb);
  const Broadcast ba = broadcast_kind(out_shape, ta.shape());
  const Broadcast bb = broadcast_kind(out_shape, tb.shape());
  Node n;
  n.kind = OpKind::Add;
  n.arity = 2;
  n.inputs[0] = a.id;
  n.inputs[1] = b.id;
  n.value = Tensor(out_shape);
  binary_apply(n.value, ta, ba, tb, bb, [](double x, double y) { return x + y; });
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const Shape out_shape = larger_shape(ta, tb);
  const Broadcast ba = broadcast_kind(out_shape, ta.shape());
  const Broadcast bb = broadcast_kind(out_shape, tb.shape());
  Node n;
  n.kind = OpKind::Mul;
  n.arity = 2;
  n.inputs[0] = a.id;
  n.inputs[1] = b.id;
  n.value = Tensor(out_shape);
  binary_apply(n.value, ta, ba, tb, bb, [](double x, double y) { return x * y; });
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != tb.rank() || ta.rank() == 0 || ta.rows() != tb.rows()) {
    throw ShapeError("concat needs equal-rank operands with matching rows, got " +
                     shape_string(ta.shape()) + " and " + shape_string(tb.shape()));
  }
  const std::size_t rows = ta.rows(), ca = ta.cols(), cb = tb.cols();
  Node n;
  n.kind = OpKind::Concat;
  n.arity = 2;
  n.inputs[0] = a.id;
  n.inputs[1] = b.id;
  n.value = ta.rank() == 1 ? Tensor(Shape{ca + cb}) : Tensor(Shape{rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) n.value[r * (ca + cb) + c] = ta[r * ca + c];
    for (std::size_t c = 0; c < cb; ++c) n.value[r * (ca + cb) + ca + c] = tb[r * cb + c];
  }
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  const Tensor& ta = value(a);
  double total = 0.0;
  for (double v : ta.data()) total += v;
  Node n;
  n.kind = OpKind::SumAll;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.value = Tensor::scalar(total);
  return push(std::move(n));
}

Var Tape::activation(Var a, Activation act) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::Act;
  n.act = act;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = activate(act, ta[i]);
  return push(std::move(n));
}

Var Tape::activation_derivative(Var a, Activation act) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::ActDerivative;
  n.act = act;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = activate_derivative(act, ta[i]);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::Sigmoid;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = gradres::sigmoid(ta[i]);
  return push(std::move(n));
}

Var Tape::l2_norm(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::L2Norm;
  n.arity = 1;
  n.inputs[0] = a.id;
  if (ta.rank() == 2) {
    n.value = Tensor(Shape{ta.rows(), 1});
    const std::size_t cols = ta.cols();
    for (std::size_t r = 0; r < ta.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += ta[r * cols + c] * ta[r * cols + c];
      n.value[r] = std::sqrt(s);
    }
  } else {
    double s = 0.0;
    for (double v : ta.data()) s += v * v;
    n.value = Tensor::scalar(std::sqrt(s));
  }
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::Scale;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.param = factor;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = factor * ta[i];
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double offset) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::AddScalar;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.param = offset;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + offset;
  return push(std::move(n));
}

Var Tape::reciprocal(Var a) {
  const Tensor& ta = value(a);
  Node n;
  n.kind = OpKind::Reciprocal;
  n.arity = 1;
  n.inputs[0] = a.id;
  n.value = Tensor(ta.shape());
  for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = 1.0 / ta[i];
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  const Node& loss_node = node(loss);
  if (loss_node.value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss_node.value.shape()));
  }
  Gradients out;
  out.grads_.resize(nodes_.size());
  out.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) out.shapes_.push_back(n.value.shape());
  out.grads_[loss.id] = Tensor(loss_node.value.shape(), 1.0);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!out.grads_[id] || n.kind == OpKind::Leaf || !n.requires_grad) continue;
    const Tensor& g = *out.grads_[id];
    for (std::uint8_t i = 0; i < n.arity; ++i) assert(n.inputs[i] < id && "tape is not topological");

    auto want = [&](int i) { return nodes_[n.inputs[i]].requires_grad; };
    auto slot = [&](int i) -> std::optional<Tensor>& { return out.grads_[n.inputs[i]]; };
    auto input = [&](int i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
    auto push_grad = [&](int i, Tensor contribution) {
      accumulate(slot(i), std::move(contribution));
    };

    switch (n.kind) {
      case OpKind::Leaf: break;
      case OpKind::MatMul: {
        const Tensor& a = input(0);
        const Tensor& b = input(1);
        if (want(0)) {
          Tensor da(a.shape());
          if (n.transpose_b) {
            as_matrix(da).noalias() = as_matrix(g) * as_matrix(b);
          } else {
            as_matrix(da).noalias() = as_matrix(g) * as_matrix(b).transpose();
          }
          push_grad(0, std::move(da));
        }
        if (want(1)) {
          Tensor db(b.shape());
          if (n.transpose_b) {
            as_matrix(db).noalias() = as_matrix(g).transpose() * as_matrix(a);
          } else {
            as_matrix(db).noalias() = as_matrix(a).transpose() * as_matrix(g);
          }
          push_grad(1, std::move(db));
        }
        break;
      }
      case OpKind::Add:
      case OpKind::Mul: {
        const Shape& out_shape = n.value.shape();
        const Broadcast b0 = broadcast_kind(out_shape, input(0).shape());
        const Broadcast b1 = broadcast_kind(out_shape, input(1).shape());
        const bool is_mul = n.kind == OpKind::Mul;
        if (want(0)) {
          Tensor d(input(0).shape());
          reduce_into(d, g, b0, is_mul ? &input(1) : nullptr, b1);
          push_grad(0, std::move(d));
        }
        if (want(1)) {
          Tensor d(input(1).shape());
          reduce_into(d, g, b1, is_mul ? &input(0) : nullptr, b0);
          push_grad(1, std::move(d));
        }
        break;
      }
      case OpKind::Concat: {
        const std::size_t rows = n.value.rows();
        const std::size_t ca = input(0).cols(), cb = input(1).cols();
        if (want(0)) {
          Tensor d(input(0).shape());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < ca; ++c) d[r * ca + c] = g[r * (ca + cb) + c];
          push_grad(0, std::move(d));
        }
        if (want(1)) {
          Tensor d(input(1).shape());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cb; ++c) d[r * cb + c] = g[r * (ca + cb) + ca + c];
          push_grad(1, std::move(d));
        }
        break;
      }
      case OpKind::SumAll: {
        push_grad(0, Tensor(input(0).shape(), g.item()));
        break;
      }
      case OpKind::Act: {
        const Tensor& x = input(0);
        Tensor d(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double slope = n.act == Activation::Tanh ? 1.0 - n.value[i] * n.value[i]
                                                         : activate_derivative(n.act, x[i]);
          d[i] = g[i] * slope;
        }
        push_grad(0, std::move(d));
        break;
      }
      case OpKind::ActDerivative: {
        const Tensor& x = input(0);
        Tensor d(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
          d[i] = g[i] * activate_second_derivative(n.act, x[i]);
        }
        push_grad(0, std::move(d));
        break;
      }
      case OpKind::Sigmoid: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * n.value[i] * (1.0 - n.value[i]);
        push_grad(0, std::move(d));
        break;
      }
      case OpKind::L2Norm: {
        const Tensor& x = input(0);
        Tensor d(x.shape());
        const std::size_t cols = x.rank() == 2 ? x.cols() : x.size();
        const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
        for (std::size_t r = 0; r < rows; ++r) {
          const double norm = n.value[r];
          if (norm == 0.0) continue;  // subgradient 0 at the origin
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] = g[r] * x[r * cols + c] / norm;
        }
        push_grad(0, std::move(d));
        break;
      }
      case OpKind::Scale: {
        Tensor d(g.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = n.param * g[i];
        push_grad(0, std::move(d));
        break;
      }
      case OpKind::AddScalar: {
        push_grad(0, g);
        break;
      }
      case OpKind::Reciprocal: {
        Tensor d(g.shape());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i] * n.value[i] * n.value[i];
        push_grad(0, std::move(d));
        break;
      }
    }
  }
  return out;
}

}  // namespace gradres
