#include "gradres/aggregate.hpp"

#include <algorithm>
#include <cmath>

namespace gradres {

AggregateCurve aggregate(const RunSpec& spec, std::span<const LearningCurve> curves) {
  AggregateCurve out;
  out.spec = spec;
  out.n_runs = curves.size();

  std::vector<const LearningCurve*> kept;
  for (const auto& c : curves) {
    if (!c.diverged) kept.push_back(&c);
  }
  if (kept.empty()) throw UnusableConfig("all runs diverged for " + spec.label());
  for (const auto* c : kept) {
    if (c->eval_epochs != kept.front()->eval_epochs) {
      throw std::invalid_argument("curves for " + spec.label() + " use different eval schedules");
    }
  }

  const std::size_t n = kept.size();
  out.n_effective = n;
  out.epochs = kept.front()->eval_epochs;
  out.mean.assign(out.epochs.size(), 0.0);
  out.std_error.assign(out.epochs.size(), 0.0);
  // Values are summed in sorted order so the result does not depend on the
  // order of the seeds.
  std::vector<double> values(n);
  for (std::size_t t = 0; t < out.epochs.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) values[i] = kept[i]->test_mse[t];
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(n);
    out.mean[t] = mean;
    if (n > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      out.std_error[t] = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    }
  }
  return out;
}

double final_window_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("final_window_mean of an empty curve");
  const std::size_t window = (values.size() + 3) / 4;
  double s = 0.0;
  for (std::size_t i = values.size() - window; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(window);
}

double criterion_value(std::span<const double> mean_curve, SelectionCriterion criterion) {
  if (criterion == SelectionCriterion::FinalWindowMean) return final_window_mean(mean_curve);
  if (mean_curve.empty()) throw std::invalid_argument("best_eval of an empty curve");
  return *std::min_element(mean_curve.begin(), mean_curve.end());
}

std::vector<Selection> select_best(std::span<const AggregateCurve> aggregates,
                                   SelectionCriterion criterion) {
  std::vector<Selection> best;
  auto better = [](const Selection& cand, const RunSpec& cs, const Selection& cur,
                   const RunSpec& us) {
    if (cand.value != cur.value) return cand.value < cur.value;
    if (cs.lr != us.lr) return cs.lr < us.lr;
    return cs.alpha_init.value_or(0.0) < us.alpha_init.value_or(0.0);
  };
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const AggregateCurve& agg = aggregates[i];
    Selection cand{agg.spec.algorithm, agg.spec.d, i, criterion_value(agg.mean, criterion)};
    auto it = std::find_if(best.begin(), best.end(), [&](const Selection& s) {
      return s.algorithm == cand.algorithm && s.d == cand.d;
    });
    if (it == best.end()) {
      best.push_back(cand);
    } else if (better(cand, agg.spec, *it, aggregates[it->aggregate_index].spec)) {
      *it = cand;
    }
  }
  if (best.empty()) throw UnusableConfig("no usable configurations to select from");
  return best;
}

}  // namespace gradres
