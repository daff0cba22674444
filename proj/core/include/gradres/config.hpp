#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradres/blocks.hpp"
#include "gradres/synthdata.hpp"

namespace gradres {

/// Invalid or unknown configuration content.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SelectionCriterion { FinalWindowMean, BestEval };

std::string_view to_string(SelectionCriterion c);
SelectionCriterion parse_selection_criterion(std::string_view name);

/// One point of the hyperparameter grid. alpha_init is set only for kinds
/// that sweep it.
struct RunSpec {
  ResidualKind algorithm = ResidualKind::Regular;
  std::size_t d = 16;
  double lr = 0.03125;
  std::optional<double> alpha_init;

  /// Canonical text form, stable across builds; used for seeding and keys.
  std::string label() const;
  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct SweepConfig {
  std::vector<ResidualKind> algorithms;
  std::vector<std::size_t> d_grid{16};
  std::vector<double> lr_grid{0.125, 0.03125, 0.0078125, 0.001953125};
  std::vector<double> alpha_init_grid{-3.0, 3.0};
  std::size_t n_seeds = 30;
  std::uint64_t base_seed = 0;
  std::size_t epochs = 5000;
  std::size_t batch_size = 512;
  std::size_t eval_every = 50;
  std::size_t test_points = 1001;
  Activation activation = Activation::Tanh;
  SinDatasetConfig dataset;
  bool normalize_grad = true;
  bool grad_retain = false;
  SelectionCriterion criterion = SelectionCriterion::FinalWindowMean;

  void validate() const;
  /// Grid points in canonical order: algorithm, d, lr, alpha_init.
  std::vector<RunSpec> enumerate() const;
};

/// "desk": d = 16, 10 seeds, 2000 epochs. "paper": d in {16, 32, 64},
/// 30 seeds, 5000 epochs. Both sweep the same seven algorithms.
SweepConfig preset(std::string_view name);

/// Parses a sweep config JSON document on top of `base`. Keys that are not
/// part of the schema raise ConfigError. A "preset" key replaces `base`.
SweepConfig parse_sweep_config(std::string_view json_text, const SweepConfig& base);

struct SingleRunConfig {
  SweepConfig common;  // grids unused
  RunSpec spec;
  std::size_t seed_index = 0;
};

/// Single-run JSON: algorithm, d, lr, alpha_init, seed plus the shared
/// training keys of the sweep schema.
SingleRunConfig parse_run_config(std::string_view json_text, const SweepConfig& base);

std::string to_json(const SweepConfig& cfg);

}  // namespace gradres
