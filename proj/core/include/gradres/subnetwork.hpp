#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gradres/tape.hpp"

namespace gradres {

class Rng;

/// Binds parameter tensors onto a tape for one forward/backward pass.
///
/// The binding order is the order in which components call bind(), which
/// makes it stable across minibatches for a fixed model.
class Binder {
 public:
  /// With `trainable` false, parameters enter the tape as constants
  /// (evaluation passes).
  explicit Binder(Tape& tape, bool trainable = true) : tape_(tape), trainable_(trainable) {}

  Var bind(Tensor& parameter);
  Tape& tape() { return tape_; }

  /// Plain SGD update: p <- p - lr * dL/dp for every bound parameter.
  void sgd_step(const Gradients& grads, double lr) const;

  std::span<const std::pair<Tensor*, Var>> bindings() const { return bindings_; }

 private:
  Tape& tape_;
  bool trainable_;
  std::vector<std::pair<Tensor*, Var>> bindings_;
};

/// y = W x + b with W of shape (out_dim x in_dim).
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in_dim, std::size_t out_dim);

  /// Weights ~ U(-1/sqrt(in_dim), 1/sqrt(in_dim)) drawn row-major; zero bias.
  static LinearLayer uniform_init(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const { return weight.shape()[1]; }
  std::size_t out_dim() const { return weight.shape()[0]; }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  struct Bound {
    Var weight;
    Var bias;
  };
  Bound bind(Binder& binder);
};

/// Applies a bound linear layer to a vector (d) or a batch (rows x d).
Var apply_linear(Tape& tape, const LinearLayer::Bound& layer, Var x);

/// Feed-forward map F: linear layers with an activation between consecutive
/// layers and none after the last, so F ends in a pre-activation.
class SubNetwork {
 public:
  SubNetwork() = default;
  SubNetwork(std::vector<LinearLayer> layers, Activation act);

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  Activation activation() const { return act_; }
  std::vector<LinearLayer>& layers() { return layers_; }
  const std::vector<LinearLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  struct Bound {
    std::vector<LinearLayer::Bound> layers;
    Activation act = Activation::Tanh;
  };
  Bound bind(Binder& binder);

 private:
  std::vector<LinearLayer> layers_;
  Activation act_ = Activation::Tanh;
};

/// Forward values kept for the symbolic Jacobian-row-sum.
struct SubNetworkTrace {
  Var output;
  std::vector<Var> pre_activations;  // one per hidden activation
  std::vector<Var> activations;      // act(pre_activations[i])
};

SubNetworkTrace forward_trace(Tape& tape, const SubNetwork::Bound& net, Var x);

/// Sum of the Jacobian rows of F at x, i.e. grad_x(sum_i F_i(x)) = J^T 1.
///
/// x is a vector (d) or a batch (rows x d); each row gets its own gradient.
/// With retain false the result is a tape constant computed by a separate
/// reverse sweep, so training gradients do not flow through it. With retain
/// true it is emitted from activation-derivative primitives on `tape` and
/// differentiates like any other node. Both routes give the same values.
/// The constant route pulls the ones vector back through the values already
/// recorded in `trace` instead of re-running F.
Var vjp_sum_outputs(Tape& tape, const SubNetwork::Bound& net, Var x, const SubNetworkTrace& trace,
                    bool retain);

/// Same, evaluated outside any tape.
Tensor vjp_sum_outputs(const SubNetwork& net, const Tensor& x);

}  // namespace gradres
