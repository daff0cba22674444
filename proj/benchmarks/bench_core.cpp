#include <benchmark/benchmark.h>

#include <numeric>

#include "gradres/config.hpp"
#include "gradres/model.hpp"
#include "gradres/rng.hpp"
#include "gradres/subnetwork.hpp"
#include "gradres/sweep.hpp"
#include "gradres/synthdata.hpp"
#include "gradres/tape.hpp"
#include "gradres/theory.hpp"
#include "gradres/train.hpp"

namespace {

using namespace gradres;

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(Shape{rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Forward and backward of a tanh layer on a minibatch.
void BM_TapeLayer(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 16;
  Rng rng(1);
  const Tensor x = random_matrix(batch, d, rng), w = random_matrix(d, d, rng);
  for (auto _ : state) {
    Tape tape;
    const Var xv = tape.constant(x), wv = tape.variable(w);
    const Var h = tape.activation(tape.matmul(xv, wv, true), Activation::Tanh);
    const Gradients g = tape.backward(tape.sum_all(tape.mul(h, h)));
    benchmark::DoNotOptimize(g[wv]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TapeLayer)->Arg(1)->Arg(64)->Arg(512);

void BM_VjpSumOutputs(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const bool retain = state.range(1) != 0;
  Rng rng(2);
  SubNetwork f({LinearLayer::uniform_init(16, 16, rng), LinearLayer::uniform_init(16, 16, rng)}, Activation::Tanh);
  const Tensor x = random_matrix(batch, 16, rng);
  for (auto _ : state) {
    Tape tape;
    Binder binder(tape);
    const auto bound = f.bind(binder);
    const Var xv = tape.variable(x);
    const auto trace = forward_trace(tape, bound, xv);
    benchmark::DoNotOptimize(tape.value(vjp_sum_outputs(tape, bound, xv, trace, retain)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_VjpSumOutputs)->Args({512, 0})->Args({512, 1});

// One SGD epoch over the desk-scale dataset.
void BM_TrainEpoch(benchmark::State& state) {
  const auto kind = static_cast<ResidualKind>(state.range(0));
  SweepConfig cfg = preset("desk");
  RunSpec spec{kind, 16, 0.03125, sweeps_alpha_init(kind) ? std::optional<double>(3.0) : std::nullopt};
  Model model = Model::build(model_spec_for(cfg, spec, 11));
  SinDatasetConfig dc = cfg.dataset;
  const auto data = generate_dataset(dc);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (auto _ : state) {
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      benchmark::DoNotOptimize(
          sgd_step(model, data, std::span(order).subspan(start, n), spec.lr));
    }
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(ResidualKind::Regular))
    ->Arg(static_cast<int>(ResidualKind::StandardTrainableScalar))
    ->Arg(static_cast<int>(ResidualKind::GradOnly))
    ->Arg(static_cast<int>(ResidualKind::ConvexCombined))
    ->Unit(benchmark::kMillisecond);

void BM_EvaluateGrid(benchmark::State& state) {
  const SweepConfig cfg = preset("desk");
  const RunSpec spec{ResidualKind::ConvexCombined, 16, 0.03125, 3.0};
  const Model model = Model::build(model_spec_for(cfg, spec, 11));
  const auto grid = test_grid_for(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_mse(model, grid));
}
BENCHMARK(BM_EvaluateGrid)->Unit(benchmark::kMicrosecond);

void BM_TheoryCampaign(benchmark::State& state) {
  const auto trials = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(theory::run_campaign(trials, 5).passes());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trials));
}
BENCHMARK(BM_TheoryCampaign)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
