#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradres/aggregate.hpp"
#include "gradres/config.hpp"
#include "gradres/synthdata.hpp"
#include "gradres/train.hpp"

namespace gradres::csv {

inline constexpr std::string_view kRunsHeader =
    "algorithm,d,lr,alpha_init,seed,epoch,test_mse,diverged";
inline constexpr std::string_view kAggHeader =
    "algorithm,d,lr,alpha_init,epoch,mean_test_mse,stderr,n_effective";
inline constexpr std::string_view kFunctionHeader = "x,y_star,y_pred";
inline constexpr std::string_view kDatasetHeader = "x,y,y_star";

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

/// One row per evaluation; a diverged run ends with a row at the divergence
/// epoch that has an empty test_mse and diverged = 1.
void write_run_rows(std::ostream& out, const RunSpec& spec, std::size_t seed_index,
                    const LearningCurve& curve);

struct LoadedRun {
  RunSpec spec;
  std::size_t seed_index = 0;
  LearningCurve curve;
};

/// Parses runs.csv and keeps only runs that reached `final_epoch` or were
/// marked diverged. Malformed lines (e.g. a torn last line) are ignored.
std::vector<LoadedRun> read_complete_runs(std::istream& in, std::size_t final_epoch);

void write_agg(std::ostream& out, std::span<const AggregateCurve> aggregates);
void write_function(std::ostream& out, std::span<const Sample> grid,
                    std::span<const double> predictions);
void write_dataset(std::ostream& out, std::span<const Sample> data);

}  // namespace gradres::csv
