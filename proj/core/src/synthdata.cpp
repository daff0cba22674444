#include "gradres/synthdata.hpp"

#include <cmath>
#include <stdexcept>

#include "gradres/rng.hpp"

namespace gradres {

double ground_truth(double x) {
  if (x < 0.0) return std::sin(0.5 * x) + 0.5 * std::sin(2.5 * x);
  return std::sin(2.0 * x) + 0.5 * std::sin(7.0 * x);
}

void SinDatasetConfig::validate() const {
  if (n < 1) throw std::invalid_argument("dataset needs n >= 1");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (!(x_min < x_max)) throw std::invalid_argument("dataset needs x_min < x_max");
}

std::vector<Sample> generate_dataset(const SinDatasetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<Sample> out(cfg.n);
  for (auto& s : out) s.x = rng.uniform(cfg.x_min, cfg.x_max);
  for (auto& s : out) {
    s.y = ground_truth(s.x);
    if (cfg.noise_std > 0.0) s.y += cfg.noise_std * rng.gaussian();
  }
  return out;
}

std::vector<Sample> generate_test_grid(std::size_t n_test, double x_min, double x_max) {
  if (n_test < 2) throw std::invalid_argument("test grid needs at least 2 points");
  if (!(x_min < x_max)) throw std::invalid_argument("test grid needs x_min < x_max");
  std::vector<Sample> out(n_test);
  const double step = (x_max - x_min) / static_cast<double>(n_test - 1);
  for (std::size_t i = 0; i < n_test; ++i) {
    const double x = i + 1 == n_test ? x_max : x_min + step * static_cast<double>(i);
    out[i] = Sample{x, ground_truth(x)};
  }
  return out;
}

double mean_squared_error(std::span<const double> prediction, std::span<const Sample> target) {
  if (prediction.size() != target.size() || target.empty()) {
    throw std::invalid_argument("prediction and target sizes differ");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = prediction[i] - target[i].y;
    s += e * e;
  }
  return s / static_cast<double>(target.size());
}

}  // namespace gradres
