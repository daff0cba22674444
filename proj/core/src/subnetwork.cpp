#include "gradres/subnetwork.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "gradres/rng.hpp"

namespace gradres {

Var Binder::bind(Tensor& parameter) {
  Var v = trainable_ ? tape_.variable(parameter) : tape_.constant(parameter);
  bindings_.emplace_back(&parameter, v);
  return v;
}

void Binder::sgd_step(const Gradients& grads, double lr) const {
  for (const auto& [param, var] : bindings_) {
    const Tensor* g = grads.find(var);
    if (!g) continue;
    auto p = param->data();
    auto d = g->data();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * d[i];
  }
}

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim)
    : weight(Shape{out_dim, in_dim}), bias(Shape{out_dim}) {}

LinearLayer LinearLayer::uniform_init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  LinearLayer layer(in_dim, out_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& w : layer.weight.storage()) w = rng.uniform(-bound, bound);
  return layer;
}

LinearLayer::Bound LinearLayer::bind(Binder& binder) {
  return Bound{binder.bind(weight), binder.bind(bias)};
}

Var apply_linear(Tape& tape, const LinearLayer::Bound& layer, Var x) {
  return tape.add(tape.matmul(x, layer.weight, /*transpose_b=*/true), layer.bias);
}

SubNetwork::SubNetwork(std::vector<LinearLayer> layers, Activation act)
    : layers_(std::move(layers)), act_(act) {
  if (layers_.empty()) throw ShapeError("sub-network needs at least one layer");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in_dim() != layers_[i - 1].out_dim()) {
      throw ShapeError("sub-network layer " + std::to_string(i) + " expects " +
                       std::to_string(layers_[i].in_dim()) + " inputs but receives " +
                       std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

std::size_t SubNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

SubNetwork::Bound SubNetwork::bind(Binder& binder) {
  Bound b;
  b.act = act_;
  for (auto& l : layers_) b.layers.push_back(l.bind(binder));
  return b;
}

SubNetworkTrace forward_trace(Tape& tape, const SubNetwork::Bound& net, Var x) {
  SubNetworkTrace trace;
  Var h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Var z = apply_linear(tape, net.layers[i], h);
    if (i + 1 == net.layers.size()) {
      trace.output = z;
    } else {
      trace.pre_activations.push_back(z);
      h = tape.activation(z, net.act);
      trace.activations.push_back(h);
    }
  }
  return trace;
}

namespace {

void check_square(const Tape& tape, const SubNetwork::Bound& net, Var x) {
  const Tensor& w_in = tape.value(net.layers.front().weight);
  const Tensor& w_out = tape.value(net.layers.back().weight);
  const std::size_t in = w_in.shape()[1];
  const std::size_t out = w_out.shape()[0];
  if (in != out) {
    throw ShapeError("Jacobian row sum needs F: R^d -> R^d, got " + std::to_string(in) + " -> " +
                     std::to_string(out));
  }
  if (tape.value(x).cols() != in) {
    throw ShapeError("input of shape " + shape_string(tape.value(x).shape()) +
                     " does not match sub-network input dimension " + std::to_string(in));
  }
}

// Reverse sweep on a private tape seeded with ones at F's output.
Tensor reverse_sweep(const Tape& outer, const SubNetwork::Bound& net, const Tensor& x) {
  Tape inner;
  SubNetwork::Bound local;
  local.act = net.act;
  for (const auto& layer : net.layers) {
    local.layers.push_back(
        {inner.constant(outer.value(layer.weight)), inner.constant(outer.value(layer.bias))});
  }
  Var xin = inner.variable(x);
  SubNetworkTrace trace = forward_trace(inner, local, xin);
  Var total = inner.sum_all(trace.output);
  return inner.backward(total)[xin];
}

// out = v w for row-major v (rows x k) and w (k x n).
void matmul_into(Tensor& out, const Tensor& v, const Tensor& w) {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto rows = static_cast<Eigen::Index>(v.rank() == 1 ? 1 : v.rows());
  const auto k = static_cast<Eigen::Index>(w.rows());
  const auto n = static_cast<Eigen::Index>(w.cols());
  Eigen::Map<RowMatrix>(out.data().data(), rows, n).noalias() =
      Eigen::Map<const RowMatrix>(v.data().data(), rows, k) *
      Eigen::Map<const RowMatrix>(w.data().data(), k, n);
}

// act'(z) given z and act(z); tanh reuses the stored value.
double slope(Activation act, double z, double a) {
  return act == Activation::Tanh ? 1.0 - a * a : activate_derivative(act, z);
}

// Value-only reverse pass of the ones cotangent through a recorded trace.
Tensor pullback_ones(const Tape& tape, const SubNetwork::Bound& net, const SubNetworkTrace& trace) {
  Tensor v(tape.value(trace.output).shape(), 1.0);
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const Tensor& w = tape.value(net.layers[l].weight);
    Tensor next = v.rank() == 1 ? Tensor(Shape{w.cols()}) : Tensor(Shape{v.rows(), w.cols()});
    matmul_into(next, v, w);
    if (l > 0) {
      const Tensor& z = tape.value(trace.pre_activations[l - 1]);
      const Tensor& a = tape.value(trace.activations[l - 1]);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] *= slope(net.act, z[i], a[i]);
    }
    v = std::move(next);
  }
  return v;
}

}  // namespace

Var vjp_sum_outputs(Tape& tape, const SubNetwork::Bound& net, Var x, const SubNetworkTrace& trace,
                    bool retain) {
  check_square(tape, net, x);
  if (trace.pre_activations.size() + 1 != net.layers.size() ||
      trace.activations.size() != trace.pre_activations.size()) {
    throw std::invalid_argument("trace does not belong to this sub-network");
  }
  if (!retain) return tape.constant(pullback_ones(tape, net, trace));

  const Tensor& out = tape.value(trace.output);
  // Row-wise cotangent of ones, pulled back layer by layer:
  // v <- v W_l, then v <- v * act'(z_{l-1}).
  Var v = tape.constant(Tensor(out.shape(), 1.0));
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    v = tape.matmul(v, net.layers[l].weight);
    if (l > 0) v = tape.mul(v, tape.activation_derivative(trace.pre_activations[l - 1], net.act));
  }
  return v;
}

Tensor vjp_sum_outputs(const SubNetwork& net, const Tensor& x) {
  Tape tape;
  Binder binder(tape, /*trainable=*/false);
  SubNetwork copy = net;
  SubNetwork::Bound bound = copy.bind(binder);
  Var xv = tape.constant(x);
  check_square(tape, bound, xv);
  return reverse_sweep(tape, bound, x);
}

}  // namespace gradres
