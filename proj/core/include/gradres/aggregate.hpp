#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "gradres/config.hpp"
#include "gradres/train.hpp"

namespace gradres {

/// Every run of a configuration diverged (or none were given).
class UnusableConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seed-aggregated learning curve of one grid point.
struct AggregateCurve {
  RunSpec spec;
  std::vector<std::size_t> epochs;
  std::vector<double> mean;
  std::vector<double> std_error;  // sample std / sqrt(n_effective); 0 when n_effective == 1
  std::size_t n_runs = 0;
  std::size_t n_effective = 0;  // runs that did not diverge
};

/// Pointwise mean and standard error over the non-diverged curves. Diverged
/// runs only lower n_effective. Throws UnusableConfig when none remain and
/// std::invalid_argument when eval schedules differ.
AggregateCurve aggregate(const RunSpec& spec, std::span<const LearningCurve> curves);

/// Mean of the last ceil(25%) of the values.
double final_window_mean(std::span<const double> values);

double criterion_value(std::span<const double> mean_curve, SelectionCriterion criterion);

struct Selection {
  ResidualKind algorithm;
  std::size_t d;
  std::size_t aggregate_index;  // into the span given to select_best
  double value;
};

/// Per (algorithm, d): argmin of the criterion over the mean curves, ties
/// going to the smaller lr and then the smaller alpha_init. Throws
/// UnusableConfig when an (algorithm, d) pair has no aggregate.
std::vector<Selection> select_best(std::span<const AggregateCurve> aggregates,
                                   SelectionCriterion criterion);

}  // namespace gradres
