#include "gradres/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace gradres::csv {

namespace {

std::string alpha_field(const std::optional<double>& a) { return a ? format_double(*a) : ""; }

std::string key_prefix(const RunSpec& spec) {
  return std::string(to_string(spec.algorithm)) + ',' + std::to_string(spec.d) + ',' +
         format_double(spec.lr) + ',' + alpha_field(spec.alpha_init);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool parse_size(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtoull(s.c_str(), &end, 10);
  return end == s.c_str() + s.size();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_run_rows(std::ostream& out, const RunSpec& spec, std::size_t seed_index,
                    const LearningCurve& curve) {
  const std::string prefix = key_prefix(spec) + ',' + std::to_string(seed_index) + ',';
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << prefix << curve.eval_epochs[i] << ',' << format_double(curve.test_mse[i]) << ",0\n";
  }
  if (curve.diverged) out << prefix << curve.diverged_epoch.value_or(0) << ",,1\n";
}

std::vector<LoadedRun> read_complete_runs(std::istream& in, std::size_t final_epoch) {
  using Key = std::tuple<std::string, std::size_t>;  // key prefix, seed
  std::map<Key, LoadedRun> partial;
  std::vector<Key> order;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line == kRunsHeader) continue;
    }
    const auto f = split(line);
    if (f.size() != 8) continue;
    LoadedRun row;
    double lr = 0.0, mse = 0.0;
    std::size_t d = 0, seed = 0, epoch = 0;
    try {
      row.spec.algorithm = parse_residual_kind(f[0]);
    } catch (const std::invalid_argument&) {
      continue;
    }
    if (!parse_size(f[1], d) || !parse_double(f[2], lr) || !parse_size(f[4], seed) ||
        !parse_size(f[5], epoch) || (f[7] != "0" && f[7] != "1")) {
      continue;
    }
    if (!f[3].empty()) {
      double a = 0.0;
      if (!parse_double(f[3], a)) continue;
      row.spec.alpha_init = a;
    }
    const bool diverged = f[7] == "1";
    if (!diverged && !parse_double(f[6], mse)) continue;
    row.spec.d = d;
    row.spec.lr = lr;
    row.seed_index = seed;

    const Key key{key_prefix(row.spec), seed};
    auto [it, inserted] = partial.try_emplace(key, row);
    if (inserted) order.push_back(key);
    LearningCurve& curve = it->second.curve;
    if (curve.diverged) continue;
    if (diverged) {
      curve.diverged = true;
      curve.diverged_epoch = epoch;
    } else {
      curve.eval_epochs.push_back(epoch);
      curve.test_mse.push_back(mse);
    }
  }

  std::vector<LoadedRun> out;
  for (const auto& key : order) {
    LoadedRun& run = partial.at(key);
    const bool complete = run.curve.diverged ||
                          (!run.curve.eval_epochs.empty() && run.curve.eval_epochs.back() == final_epoch);
    if (complete) out.push_back(std::move(run));
  }
  return out;
}

void write_agg(std::ostream& out, std::span<const AggregateCurve> aggregates) {
  out << kAggHeader << '\n';
  for (const auto& agg : aggregates) {
    const std::string prefix = key_prefix(agg.spec) + ',';
    for (std::size_t i = 0; i < agg.epochs.size(); ++i) {
      out << prefix << agg.epochs[i] << ',' << format_double(agg.mean[i]) << ','
          << format_double(agg.std_error[i]) << ',' << agg.n_effective << '\n';
    }
  }
}

void write_function(std::ostream& out, std::span<const Sample> grid,
                    std::span<const double> predictions) {
  if (grid.size() != predictions.size()) throw std::invalid_argument("grid and predictions differ in size");
  out << kFunctionHeader << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << format_double(grid[i].x) << ',' << format_double(grid[i].y) << ','
        << format_double(predictions[i]) << '\n';
  }
}

void write_dataset(std::ostream& out, std::span<const Sample> data) {
  out << kDatasetHeader << '\n';
  for (const auto& s : data) {
    out << format_double(s.x) << ',' << format_double(s.y) << ',' << format_double(ground_truth(s.x))
        << '\n';
  }
}

}  // namespace gradres::csv
