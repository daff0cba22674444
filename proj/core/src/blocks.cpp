#include "gradres/blocks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradres {

namespace {

struct KindName {
  ResidualKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ResidualKind::Regular, "Regular"},
    {ResidualKind::Standard, "Standard"},
    {ResidualKind::StandardTrainableScalar, "StandardTrainableScalar"},
    {ResidualKind::GradOnly, "GradOnly"},
    {ResidualKind::Addition, "Addition"},
    {ResidualKind::ConvexCombined, "ConvexCombined"},
    {ResidualKind::GradMagnitudeConcat, "GradMagnitudeConcat"},
    {ResidualKind::IndependentScalars, "IndependentScalars"},
    {ResidualKind::SampleDependentScalars, "SampleDependentScalars"},
};

// 1 - s for a sigmoid node s, as a tape expression.
Var one_minus(Tape& tape, Var s) { return tape.add_scalar(tape.scale(s, -1.0), 1.0); }

}  // namespace

std::string_view to_string(ResidualKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

ResidualKind parse_residual_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown residual kind '" + std::string(name) + "'");
}

std::vector<ResidualKind> all_residual_kinds() {
  std::vector<ResidualKind> out;
  for (const auto& [k, name] : kKindNames) out.push_back(k);
  return out;
}

bool uses_gradient(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::Regular:
    case ResidualKind::Standard:
    case ResidualKind::StandardTrainableScalar:
      return false;
    default:
      return true;
  }
}

bool has_alpha(ResidualKind kind) {
  return kind == ResidualKind::ConvexCombined || kind == ResidualKind::IndependentScalars;
}

bool has_beta(ResidualKind kind) {
  return kind == ResidualKind::StandardTrainableScalar || kind == ResidualKind::IndependentScalars;
}

bool has_scalar_heads(ResidualKind kind) { return kind == ResidualKind::SampleDependentScalars; }

bool sweeps_alpha_init(ResidualKind kind) { return has_alpha(kind) || has_scalar_heads(kind); }

ResidualVariantSpec ResidualVariantSpec::make(ResidualKind kind, std::size_t d,
                                              std::optional<double> alpha_init) {
  ResidualVariantSpec spec;
  spec.kind = kind;
  const double a = alpha_init.value_or(3.0);
  if (kind == ResidualKind::StandardTrainableScalar) {
    spec.beta_init = 1.0 / std::sqrt(static_cast<double>(d));
  } else if (sweeps_alpha_init(kind)) {
    spec.alpha_init = a;
    if (kind != ResidualKind::ConvexCombined) spec.beta_init = -a;
  }
  return spec;
}

void ResidualVariantSpec::validate() const {
  const bool wants_alpha = has_alpha(kind) || has_scalar_heads(kind);
  const bool wants_beta = has_beta(kind) || has_scalar_heads(kind);
  const std::string name(to_string(kind));
  if (wants_alpha != alpha_init.has_value()) {
    throw std::invalid_argument(name + (wants_alpha ? " needs" : " does not take") + " alpha_init");
  }
  if (wants_beta != beta_init.has_value()) {
    throw std::invalid_argument(name + (wants_beta ? " needs" : " does not take") + " beta_init");
  }
  if (!(norm_epsilon >= 0.0)) throw std::invalid_argument("norm_epsilon must be >= 0");
}

SampleScalarHead::SampleScalarHead(std::size_t d, double bias_init)
    : weight(Shape{1, d}), bias(Tensor::scalar(bias_init)) {}

SampleScalarHead::Bound SampleScalarHead::bind(Binder& binder) {
  return Bound{binder.bind(weight), binder.bind(bias)};
}

Var apply_head(Tape& tape, const SampleScalarHead::Bound& head, Var x) {
  return tape.sigmoid(tape.add(tape.matmul(x, head.weight, /*transpose_b=*/true), head.bias));
}

Var normalize_rows(Tape& tape, Var g, double epsilon) {
  Var denom = tape.add_scalar(tape.l2_norm(g), epsilon);
  return tape.mul(g, tape.reciprocal(denom));
}

Var grad_residual_term(Tape& tape, const SubNetwork::Bound& f, Var x, const SubNetworkTrace& trace,
                       const ResidualVariantSpec& spec) {
  Var g = vjp_sum_outputs(tape, f, x, trace, spec.grad_retain);
  return spec.normalize_grad ? normalize_rows(tape, g, spec.norm_epsilon) : g;
}

ResidualBlock::ResidualBlock(ResidualVariantSpec spec, SubNetwork f)
    : spec_(spec), f_(std::move(f)) {
  spec_.validate();
  if (f_.in_dim() != f_.out_dim()) throw ShapeError("residual block needs a square sub-network");
  const std::size_t d = f_.in_dim();
  if (has_alpha(spec_.kind)) alpha_ = Tensor::scalar(*spec_.alpha_init);
  if (has_beta(spec_.kind)) beta_ = Tensor::scalar(*spec_.beta_init);
  if (has_scalar_heads(spec_.kind)) {
    alpha_head_.emplace(d, *spec_.alpha_init);
    beta_head_.emplace(d, *spec_.beta_init);
  }
}

std::size_t ResidualBlock::extra_parameter_count() const {
  std::size_t n = 0;
  if (alpha_) n += alpha_->size();
  if (beta_) n += beta_->size();
  if (alpha_head_) n += alpha_head_->weight.size() + alpha_head_->bias.size();
  if (beta_head_) n += beta_head_->weight.size() + beta_head_->bias.size();
  return n;
}

BlockOutput ResidualBlock::forward(Binder& binder, Var x) {
  Tape& tape = binder.tape();
  if (tape.value(x).cols() != dim()) {
    throw ShapeError("block input " + shape_string(tape.value(x).shape()) +
                     " does not match block width " + std::to_string(dim()));
  }
  const SubNetwork::Bound f = f_.bind(binder);
  const SubNetworkTrace trace = forward_trace(tape, f, x);
  const Var fx = trace.output;

  switch (spec_.kind) {
    case ResidualKind::Regular:
      return {fx, std::nullopt};
    case ResidualKind::Standard:
      return {tape.add(fx, x), std::nullopt};
    case ResidualKind::StandardTrainableScalar: {
      Var beta = binder.bind(*beta_);
      return {tape.add(fx, tape.mul(beta, x)), std::nullopt};
    }
    case ResidualKind::GradOnly:
      return {tape.add(fx, grad_residual_term(tape, f, x, trace, spec_)), std::nullopt};
    case ResidualKind::Addition: {
      Var g = grad_residual_term(tape, f, x, trace, spec_);
      return {tape.add(tape.add(fx, x), g), std::nullopt};
    }
    case ResidualKind::ConvexCombined: {
      Var s = tape.sigmoid(binder.bind(*alpha_));
      Var g = grad_residual_term(tape, f, x, trace, spec_);
      Var skip = tape.add(tape.mul(one_minus(tape, s), x), tape.mul(s, g));
      return {tape.add(fx, skip), std::nullopt};
    }
    case ResidualKind::GradMagnitudeConcat: {
      Var g = vjp_sum_outputs(tape, f, x, trace, spec_.grad_retain);
      return {fx, tape.l2_norm(g)};
    }
    case ResidualKind::IndependentScalars: {
      Var s_alpha = tape.sigmoid(binder.bind(*alpha_));
      Var s_beta = tape.sigmoid(binder.bind(*beta_));
      Var g = grad_residual_term(tape, f, x, trace, spec_);
      Var skip = tape.add(tape.mul(s_beta, x), tape.mul(s_alpha, g));
      return {tape.add(fx, skip), std::nullopt};
    }
    case ResidualKind::SampleDependentScalars: {
      Var s_alpha = apply_head(tape, alpha_head_->bind(binder), x);
      Var s_beta = apply_head(tape, beta_head_->bind(binder), x);
      Var g = grad_residual_term(tape, f, x, trace, spec_);
      Var skip = tape.add(tape.mul(s_beta, x), tape.mul(s_alpha, g));
      return {tape.add(fx, skip), std::nullopt};
    }
  }
  throw std::invalid_argument("unknown residual kind");
}

}  // namespace gradres
