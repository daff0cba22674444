#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gradres/rng.hpp"
#include "gradres/subnetwork.hpp"

namespace gradres::testing {

/// Random feed-forward net with `widths.size() - 1` layers; weights and
/// biases ~ U(-scale, scale).
SubNetwork random_subnetwork(const std::vector<std::size_t>& widths, Activation act, Rng& rng,
                             double scale = 0.8);

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Central difference of f along coordinate i of x.
double central_difference(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x, std::size_t i, double step);

/// |a - b| / max(|a|, |b|), 0 when both vanish.
double relative_error(double a, double b);

struct CheckResult {
  double max_rel_error = 0.0;
  std::size_t compared = 0;
};

/// Random MLP (2 to 4 layers, widths <= 32, tanh or sin) and a random input
/// batch; compares tape gradients of 0.5 |F(x)|^2 w.r.t. every parameter and
/// the input against central differences (step 1e-5) wherever |grad| > 1e-6.
CheckResult mlp_gradient_check(std::uint64_t seed);

/// Two-layer tanh F on R^16: vjp_sum_outputs against central differences
/// (step 1e-5) of sum_i F_i.
CheckResult vjp_finite_difference_check(std::uint64_t seed, std::size_t d = 16);

/// One-hidden-layer F: vjp_sum_outputs against the hand-derived
/// W1^T (act'(W1 x + b1) * W2^T 1), evaluated with plain loops.
double vjp_closed_form_error(std::uint64_t seed, Activation act, std::size_t d = 16);

}  // namespace gradres::testing
