#include "gradres/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gradres/rng.hpp"

namespace gradres {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
}

double evaluate_mse(const Model& model, std::span<const Sample> grid) {
  std::vector<double> xs(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) xs[i] = grid[i].x;
  return mean_squared_error(model.predict(xs), grid);
}

Var minibatch_loss(Tape& tape, Binder& binder, Model& model, std::span<const Sample> data,
                   std::span<const std::size_t> indices) {
  const std::size_t n = indices.size();
  Tensor xs(Shape{n, 1}), ys(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = data[indices[i]].x;
    ys[i] = data[indices[i]].y;
  }
  const Var out = model.forward(binder, tape.constant(std::move(xs)));
  const Var diff = tape.sub(out, tape.constant(std::move(ys)));
  return tape.scale(tape.sum_all(tape.mul(diff, diff)), 1.0 / static_cast<double>(n));
}

double sgd_step(Model& model, std::span<const Sample> data, std::span<const std::size_t> indices,
                double lr) {
  Tape tape;
  Binder binder(tape);
  const Var loss = minibatch_loss(tape, binder, model, data, indices);
  binder.sgd_step(tape.backward(loss), lr);
  return tape.value(loss).item();
}

LearningCurve train(Model& model, std::span<const Sample> data, std::span<const Sample> test_grid,
                    const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training set is empty");

  LearningCurve curve;
  auto record = [&](std::size_t epoch) {
    const double mse = evaluate_mse(model, test_grid);
    if (!std::isfinite(mse)) throw NumericError("non-finite test MSE");
    curve.eval_epochs.push_back(epoch);
    curve.test_mse.push_back(mse);
  };

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t epoch = 0;
  try {
    record(0);
    for (epoch = 1; epoch <= cfg.epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
      }
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t len = std::min(cfg.batch_size, order.size() - start);
        sgd_step(model, data, std::span(order).subspan(start, len), cfg.lr);
      }
      if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) record(epoch);
    }
  } catch (const NumericError&) {
    curve.diverged = true;
    curve.diverged_epoch = epoch;
  }
  curve.final_params_digest = model.digest();
  return curve;
}

}  // namespace gradres
