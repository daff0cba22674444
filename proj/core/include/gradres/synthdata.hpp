#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace gradres {

/// Piecewise two-tone target: low frequencies for x < 0, high for x >= 0.
///   x <  0: sin(0.5 x) + 0.5 sin(2.5 x)
///   x >= 0: sin(2 x)   + 0.5 sin(7 x)
double ground_truth(double x);

struct SinDatasetConfig {
  std::size_t n = 3000;
  double noise_std = 0.1;
  double x_min = -4.0 * std::numbers::pi;
  double x_max = 4.0 * std::numbers::pi;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  double x = 0.0;
  double y = 0.0;
};

/// n samples with x ~ U[x_min, x_max) and y = ground_truth(x) + noise_std * N(0,1).
/// All x are drawn first, then the noise, from one Rng seeded with cfg.seed.
std::vector<Sample> generate_dataset(const SinDatasetConfig& cfg);

/// n_test evenly spaced points on [x_min, x_max] (both ends included) with
/// noiseless targets.
std::vector<Sample> generate_test_grid(std::size_t n_test, double x_min, double x_max);

double mean_squared_error(std::span<const double> prediction, std::span<const Sample> target);

}  // namespace gradres
