#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace gradres::testing {

SubNetwork random_subnetwork(const std::vector<std::size_t>& widths, Activation act, Rng& rng,
                             double scale) {
  std::vector<LinearLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LinearLayer layer(widths[l], widths[l + 1]);
    for (double& w : layer.weight.storage()) w = rng.uniform(-scale, scale);
    for (double& b : layer.bias.storage()) b = rng.uniform(-scale, scale);
    layers.push_back(std::move(layer));
  }
  return SubNetwork(std::move(layers), act);
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

double central_difference(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x, std::size_t i, double step) {
  const double x0 = x[i];
  x[i] = x0 + step;
  const double up = f(x);
  x[i] = x0 - step;
  const double down = f(x);
  return (up - down) / (2.0 * step);
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

namespace {

double half_squared_norm(SubNetwork& net, const Tensor& x) {
  Tape tape;
  Binder binder(tape, false);
  const auto bound = net.bind(binder);
  const Var out = forward_trace(tape, bound, tape.constant(x)).output;
  return 0.5 * tape.value(tape.sum_all(tape.mul(out, out))).item();
}

}  // namespace

CheckResult mlp_gradient_check(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n_layers = 2 + rng.below(3);
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l <= n_layers; ++l) widths.push_back(1 + rng.below(32));
  const Activation act = rng.below(2) == 0 ? Activation::Tanh : Activation::Sin;
  SubNetwork net = random_subnetwork(widths, act, rng);
  const std::size_t batch = 1 + rng.below(4);
  Tensor x = random_tensor(Shape{batch, widths.front()}, rng);

  Tape tape;
  Binder binder(tape);
  const auto bound = net.bind(binder);
  const Var xv = tape.variable(x);
  const Var out = forward_trace(tape, bound, xv).output;
  const Gradients grads = tape.backward(tape.scale(tape.sum_all(tape.mul(out, out)), 0.5));

  CheckResult result;
  auto compare = [&](const Tensor& analytic, std::vector<double>& storage,
                     const std::function<double()>& loss) {
    for (std::size_t i = 0; i < storage.size(); ++i) {
      if (std::abs(analytic[i]) <= 1e-6) continue;
      const double orig = storage[i];
      storage[i] = orig + 1e-5;
      const double up = loss();
      storage[i] = orig - 1e-5;
      const double down = loss();
      storage[i] = orig;
      const double numeric = (up - down) / 2e-5;
      result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], numeric));
      ++result.compared;
    }
  };

  auto loss = [&] { return half_squared_norm(net, x); };
  for (const auto& [param, var] : binder.bindings()) compare(grads[var], param->storage(), loss);
  compare(grads[xv], x.storage(), loss);
  return result;
}

CheckResult vjp_finite_difference_check(std::uint64_t seed, std::size_t d) {
  Rng rng(seed);
  const SubNetwork net = random_subnetwork({d, d, d}, Activation::Tanh, rng);
  const Tensor x = random_tensor(Shape{d}, rng);
  const Tensor g = vjp_sum_outputs(net, x);

  auto sum_outputs = [&](const std::vector<double>& point) {
    Tape tape;
    Binder binder(tape, false);
    SubNetwork copy = net;
    const auto bound = copy.bind(binder);
    const Var out = forward_trace(tape, bound, tape.constant(Tensor(Shape{d}, point))).output;
    return tape.value(tape.sum_all(out)).item();
  };
  CheckResult result;
  for (std::size_t i = 0; i < d; ++i) {
    const double numeric = central_difference(sum_outputs, x.storage(), i, 1e-5);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(g[i], numeric));
    ++result.compared;
  }
  return result;
}

double vjp_closed_form_error(std::uint64_t seed, Activation act, std::size_t d) {
  Rng rng(seed);
  const SubNetwork net = random_subnetwork({d, d, d}, act, rng);
  const Tensor x = random_tensor(Shape{d}, rng);
  const Tensor g = vjp_sum_outputs(net, x);

  const Tensor& w1 = net.layers()[0].weight;
  const Tensor& b1 = net.layers()[0].bias;
  const Tensor& w2 = net.layers()[1].weight;
  std::vector<double> inner(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double z = b1[j];
    for (std::size_t k = 0; k < d; ++k) z += w1.at(j, k) * x[k];
    double col_sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) col_sum += w2.at(i, j);
    inner[j] = activate_derivative(act, z) * col_sum;
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double expected = 0.0;
    for (std::size_t j = 0; j < d; ++j) expected += w1.at(j, k) * inner[j];
    worst = std::max(worst, std::abs(expected - g[k]));
  }
  return worst;
}

}  // namespace gradres::testing
