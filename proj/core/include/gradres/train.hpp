#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradres/model.hpp"
#include "gradres/synthdata.hpp"

namespace gradres {

struct TrainConfig {
  double lr = 0.03125;
  std::size_t batch_size = 512;
  std::size_t epochs = 5000;
  std::size_t eval_every = 50;
  std::uint64_t seed = 0;  // drives minibatch shuffling

  void validate() const;
};

struct LearningCurve {
  std::vector<std::size_t> eval_epochs;
  std::vector<double> test_mse;
  bool diverged = false;
  std::optional<std::size_t> diverged_epoch;
  std::uint64_t final_params_digest = 0;

  std::size_t size() const { return test_mse.size(); }
};

double evaluate_mse(const Model& model, std::span<const Sample> grid);

/// Loss of one minibatch on the tape (mean squared error).
Var minibatch_loss(Tape& tape, Binder& binder, Model& model, std::span<const Sample> data,
                   std::span<const std::size_t> indices);

/// One plain SGD step on the given minibatch; returns the loss before the step.
double sgd_step(Model& model, std::span<const Sample> data, std::span<const std::size_t> indices,
                double lr);

/// Minibatch SGD. Each epoch shuffles the sample order with the run Rng
/// (Fisher-Yates) and sweeps ceil(N / batch_size) batches, the last one
/// possibly short. The test MSE is recorded at epoch 0 and after every
/// eval_every epochs (and after the last epoch). A non-finite value stops the
/// run and marks it diverged at the epoch where it happened.
LearningCurve train(Model& model, std::span<const Sample> data, std::span<const Sample> test_grid,
                    const TrainConfig& cfg);

}  // namespace gradres
