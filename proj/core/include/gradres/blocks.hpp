#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "gradres/subnetwork.hpp"

namespace gradres {

enum class ResidualKind {
  Regular,                  // F(x)
  Standard,                 // F(x) + x
  StandardTrainableScalar,  // F(x) + beta x
  GradOnly,                 // F(x) + g
  Addition,                 // F(x) + x + g
  ConvexCombined,           // F(x) + (1 - s(alpha)) x + s(alpha) g
  GradMagnitudeConcat,      // (F(x), |grad|) concatenated downstream
  IndependentScalars,       // F(x) + s(beta) x + s(alpha) g
  SampleDependentScalars,   // F(x) + s(beta(x)) x + s(alpha(x)) g
};

std::string_view to_string(ResidualKind kind);
ResidualKind parse_residual_kind(std::string_view name);
std::vector<ResidualKind> all_residual_kinds();

bool uses_gradient(ResidualKind kind);
bool has_alpha(ResidualKind kind);
bool has_beta(ResidualKind kind);
bool has_scalar_heads(ResidualKind kind);
/// Kinds whose initialization is swept over the alpha-init grid.
bool sweeps_alpha_init(ResidualKind kind);

struct ResidualVariantSpec {
  ResidualKind kind = ResidualKind::Regular;
  std::optional<double> alpha_init;
  std::optional<double> beta_init;
  bool normalize_grad = true;
  bool grad_retain = false;
  double norm_epsilon = 1e-8;

  /// Fills the scalar initializations a kind needs for hidden width d:
  /// beta = 1/sqrt(d) for StandardTrainableScalar; alpha from `alpha_init`
  /// (default 3) for the alpha kinds, with beta = -alpha so that
  /// s(beta) = 1 - s(alpha) at initialization.
  static ResidualVariantSpec make(ResidualKind kind, std::size_t d,
                                  std::optional<double> alpha_init = std::nullopt);

  /// Throws std::invalid_argument when a scalar is present on a kind that
  /// has none, or missing on a kind that needs it.
  void validate() const;
};

/// s(w^T x + c) per sample; the weight is stored as a (1 x d) row.
struct SampleScalarHead {
  Tensor weight;
  Tensor bias;

  SampleScalarHead() = default;
  SampleScalarHead(std::size_t d, double bias_init);

  struct Bound {
    Var weight;
    Var bias;
  };
  Bound bind(Binder& binder);
};

/// Per-sample head output: a (rows x 1) column for a batch, a (1) vector for
/// a single sample.
Var apply_head(Tape& tape, const SampleScalarHead::Bound& head, Var x);

/// g / (|g| + eps) row by row.
Var normalize_rows(Tape& tape, Var g, double epsilon);

/// The gradient shortcut term for one block: the Jacobian row sum of F at x,
/// normalized when the spec asks for it.
Var grad_residual_term(Tape& tape, const SubNetwork::Bound& f, Var x, const SubNetworkTrace& trace,
                       const ResidualVariantSpec& spec);

struct BlockOutput {
  Var h;
  /// |sum_i grad F_i(x)|, set only for GradMagnitudeConcat.
  std::optional<Var> grad_norm;
};

/// A residual block around a sub-network F: R^d -> R^d.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ResidualVariantSpec spec, SubNetwork f);

  const ResidualVariantSpec& spec() const { return spec_; }
  SubNetwork& sub_network() { return f_; }
  const SubNetwork& sub_network() const { return f_; }
  std::size_t dim() const { return f_.in_dim(); }

  std::optional<Tensor>& alpha() { return alpha_; }
  const std::optional<Tensor>& alpha() const { return alpha_; }
  std::optional<Tensor>& beta() { return beta_; }
  const std::optional<Tensor>& beta() const { return beta_; }
  std::optional<SampleScalarHead>& alpha_head() { return alpha_head_; }
  std::optional<SampleScalarHead>& beta_head() { return beta_head_; }

  /// Trainable scalars and heads, excluding F.
  std::size_t extra_parameter_count() const;

  /// Binds F and the block scalars (in that order) and evaluates the block.
  BlockOutput forward(Binder& binder, Var x);

 private:
  ResidualVariantSpec spec_;
  SubNetwork f_;
  std::optional<Tensor> alpha_;
  std::optional<Tensor> beta_;
  std::optional<SampleScalarHead> alpha_head_;
  std::optional<SampleScalarHead> beta_head_;
};

}  // namespace gradres
