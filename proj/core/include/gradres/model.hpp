#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gradres/blocks.hpp"

namespace gradres {

struct ModelSpec {
  std::size_t hidden_dim = 16;
  Activation activation = Activation::Tanh;
  ResidualVariantSpec variant;
  std::uint64_t weight_init_seed = 0;

  void validate() const;
};

/// Three-hidden-layer regression MLP, 1 -> d -> d -> d -> 1, with the
/// residual block wrapping hidden layers two and three:
///
///   h1  = act(W1 x + b1)
///   F   = W3 act(W2 h1 + b2) + b3
///   h   = block(F, h1)
///   out = W4 act(h) + b4           (act([F, |g|]) for GradMagnitudeConcat)
///
/// The Jacobian row sum is taken with respect to h1.
class Model {
 public:
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn in layer order from
  /// an Rng seeded with spec.weight_init_seed; biases zero.
  static Model build(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  const ResidualBlock& block() const { return block_; }
  ResidualBlock& block() { return block_; }
  const LinearLayer& input_layer() const { return input_; }
  LinearLayer& input_layer() { return input_; }
  const LinearLayer& output_layer() const { return output_; }
  LinearLayer& output_layer() { return output_; }

  /// x is an (n x 1) batch; returns the (n x 1) prediction node.
  Var forward(Binder& binder, Var x);

  std::vector<double> predict(std::span<const double> xs) const;

  std::size_t parameter_count() const;
  /// Parameters in binding order.
  std::vector<const Tensor*> parameters() const;
  /// FNV-1a over the bytes of every parameter, in binding order.
  std::uint64_t digest() const;

 private:
  ModelSpec spec_;
  LinearLayer input_;
  ResidualBlock block_;
  LinearLayer output_;
};

inline Model build_model(const ModelSpec& spec) { return Model::build(spec); }

}  // namespace gradres
