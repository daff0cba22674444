#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gradres/aggregate.hpp"
#include "gradres/config.hpp"
#include "gradres/model.hpp"
#include "gradres/train.hpp"

namespace gradres {

/// Seeds of one run. They depend on the seed index only, so every grid point
/// sees the same data, initial weights (where shapes agree) and batch order
/// for a given seed index.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t weights = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t dataset = 0;
};

RunSeeds derive_run_seeds(const SweepConfig& cfg, std::size_t seed_index);

ModelSpec model_spec_for(const SweepConfig& cfg, const RunSpec& spec, std::uint64_t weight_seed);
TrainConfig train_config_for(const SweepConfig& cfg, const RunSpec& spec, std::uint64_t shuffle_seed);
std::vector<Sample> test_grid_for(const SweepConfig& cfg);

struct RunResult {
  RunSpec spec;
  std::size_t seed_index = 0;
  LearningCurve curve;
  /// Predictions of the trained model on test_grid_for(cfg); empty for
  /// diverged runs and for runs reloaded from runs.csv.
  std::vector<double> grid_predictions;
};

/// Trains one (grid point, seed) pair from scratch.
RunResult execute_run(const SweepConfig& cfg, const RunSpec& spec, std::size_t seed_index);

/// MSE of `predictions` against the grid targets for points with lo <= x <= hi.
double restricted_mse(std::span<const Sample> grid, std::span<const double> predictions, double lo,
                      double hi);

struct SweepProgress {
  std::size_t done = 0;
  std::size_t total = 0;
  std::size_t resumed = 0;
  const RunResult* last = nullptr;  // null for reloaded runs
};

struct SweepOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::size_t workers = 1;
  bool resume = true;
  bool write_function_files = true;
  std::function<void(const SweepProgress&)> progress;
};

struct SweepResult {
  SweepConfig config;
  std::vector<RunSpec> specs;     // canonical order
  std::vector<RunResult> runs;    // specs x seeds, seed index fastest
  std::vector<AggregateCurve> aggregates;  // usable grid points, canonical order
  std::vector<RunSpec> unusable;
  std::vector<Selection> best;
  std::size_t executed = 0;
  std::size_t resumed = 0;

  const RunResult& run(std::size_t spec_index, std::size_t seed_index) const {
    return runs[spec_index * config.n_seeds + seed_index];
  }
  std::span<const RunResult> runs_of(const RunSpec& spec) const;
  const AggregateCurve* best_for(ResidualKind algorithm, std::size_t d) const;
};

/// Runs every grid point for every seed index on a pool of worker threads.
///
/// With an output directory, runs.csv is appended one finished run at a time
/// in canonical order (independent of the worker count), so an interrupted
/// sweep resumes by reloading the complete runs and skipping them. At the
/// end agg.csv, best.json, config.json and one function_<alg>_d<d>.csv per
/// selected configuration are written.
SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

/// Grid predictions of a run, retraining it when they were not kept.
std::vector<double> predictions_for(const SweepConfig& cfg, const RunResult& run);

}  // namespace gradres
