// Acceptance checks. Prints one PASS/FAIL line per criterion and a summary
// line, and exits nonzero if any criterion fails.
//
//   gradres_acceptance [cache_dir]
//
// The desk-scale sweeps are written under cache_dir (default
// ./acceptance_cache) and resumed on later invocations. The PASS/FAIL lines
// are also written to cache_dir/acceptance_report.txt.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

#include "gradres/aggregate.hpp"
#include "gradres/config.hpp"
#include "gradres/csv.hpp"
#include "gradres/rng.hpp"
#include "gradres/sweep.hpp"
#include "gradres/theory.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gradres;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string lines;
int checks = 0;
int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  ++checks;
  if (!ok) ++failures;
  const std::string line = (ok ? "PASS " : "FAIL ") + name + ": " + detail + "\n";
  lines += line;
  std::fputs(line.c_str(), stdout);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rows_of(const RunResult& r) {
  std::ostringstream ss;
  csv::write_run_rows(ss, r.spec, r.seed_index, r.curve);
  return ss.str();
}

void theorem_campaign() {
  const auto t0 = Clock::now();
  double worst_identity = 0.0;
  const theory::CampaignSummary s =
      theory::run_campaign(1000, 20240917, [&](const auto&, const theory::ReversalReport& r) {
        worst_identity = std::max(worst_identity, theory::angle_identity_error(r));
      });
  const double secs = seconds_since(t0);
  report("theorem_campaign",
         s.trials == 1000 && s.assumption3_ok > 0 && s.bound_violations == 0 &&
             s.lemma1_violations == 0 && s.lemma2_violations == 0 && secs < 10.0,
         fmt("%zu trials, %zu evaluated, %zu with assumption 3, violations bound=%zu lemma1=%zu "
             "lemma2=%zu, %.3f s",
             s.trials, s.evaluated, s.assumption3_ok, s.bound_violations, s.lemma1_violations,
             s.lemma2_violations, secs));
  report("angle_identity", s.identity_violations == 0 && worst_identity <= 1e-10,
         fmt("max |measured - 2cos(theta/2)| = %.3g over %zu reports", worst_identity, s.evaluated));
}

void plane_wave_reversal() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t bad = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const theory::CampaignTrial t = theory::generate_plane_wave_trial(seed);
    const theory::ReversalReport r = theory::verify_reversal(t.f, t.band, t.x0);
    if (!(r.grad_norm_x0 > 0.0) || r.measured_sum_norm > 1e-9) ++bad;
    worst = std::max(worst, r.measured_sum_norm);
  }
  const double secs = seconds_since(t0);
  report("plane_wave_reversal", bad == 0 && secs < 1.0,
         fmt("100 trials, max |g0 + g1| = %.3g, %.4f s", worst, secs));
}

void autodiff_oracle() {
  double mlp = 0.0, fd = 0.0, closed = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    mlp = std::max(mlp, testing::mlp_gradient_check(seed).max_rel_error);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    fd = std::max(fd, testing::vjp_finite_difference_check(seed).max_rel_error);
    for (Activation act : {Activation::Tanh, Activation::Relu, Activation::Sin}) {
      closed = std::max(closed, testing::vjp_closed_form_error(seed, act));
    }
  }
  report("autodiff_oracle", mlp <= 1e-4 && fd <= 1e-6 && closed <= 1e-12,
         fmt("MLP max rel err %.3g (100 nets), vjp vs finite differences %.3g, vjp vs closed "
             "form %.3g",
             mlp, fd, closed));
}

void unit_sum_property() {
  Rng rng(7);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t d = 1 + rng.below(8);
    theory::Point a(d), b(d);
    const double scale = std::exp(rng.uniform(-3.0, 3.0));
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = rng.gaussian();
      // Mix in near-opposite pairs, where the inequality is tight.
      b[k] = (i % 2 ? -a[k] : 0.0) * scale + rng.gaussian() * (i % 2 ? 1e-3 : 1.0);
    }
    const auto r = theory::unit_sum_inequality(a, b);
    if (r.lhs > r.rhs + theory::kComparisonSlack) ++violations;
  }
  report("unit_sum_inequality", violations == 0, fmt("10000 pairs, %zu violations", violations));
}

// Per-seed final-window means of a grid point's non-diverged runs.
std::vector<double> final_values(const SweepResult& sweep, const RunSpec& spec) {
  std::vector<double> out;
  for (const RunResult& r : sweep.runs_of(spec)) {
    if (!r.curve.diverged) out.push_back(final_window_mean(r.curve.test_mse));
  }
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  m.n = v.size();
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

SweepConfig desk_sweep() {
  SweepConfig cfg = preset("desk");
  cfg.algorithms = {ResidualKind::StandardTrainableScalar, ResidualKind::GradOnly,
                    ResidualKind::ConvexCombined};
  return cfg;
}

SweepResult sweep_into(const SweepConfig& cfg, const fs::path& dir, std::size_t workers) {
  SweepOptions opt;
  opt.out_dir = dir;
  opt.workers = workers;
  opt.progress = [](const SweepProgress& p) {
    if (p.last) {
      std::cerr << "  [" << p.done << "/" << p.total << "] " << p.last->spec.label() << " seed "
                << p.last->seed_index << "\n";
    }
  };
  const auto t0 = Clock::now();
  SweepResult r = run_sweep(cfg, opt);
  std::cerr << "  sweep in " << dir << ": " << r.executed << " executed, " << r.resumed
            << " resumed, " << seconds_since(t0) << " s\n";
  return r;
}

void ordering_checks(const SweepConfig& cfg, const SweepResult& sweep) {
  const std::size_t d = cfg.d_grid.front();
  const AggregateCurve* sts = sweep.best_for(ResidualKind::StandardTrainableScalar, d);
  const AggregateCurve* go = sweep.best_for(ResidualKind::GradOnly, d);
  const AggregateCurve* cc = sweep.best_for(ResidualKind::ConvexCombined, d);
  if (!sts || !go || !cc) {
    report("ordering_vs_trainable_scalar", false, "a best configuration is missing");
    report("right_half_region", false, "a best configuration is missing");
    return;
  }
  const MeanSe base = mean_se(final_values(sweep, sts->spec));
  bool ok = true;
  std::string detail = fmt("StandardTrainableScalar[%s] %.5f+-%.5f", sts->spec.label().c_str(),
                           base.mean, base.se);
  for (const AggregateCurve* c : {go, cc}) {
    const MeanSe m = mean_se(final_values(sweep, c->spec));
    const double pooled = std::sqrt(m.se * m.se + base.se * base.se);
    const double margin = base.mean - m.mean;
    ok = ok && margin > 2.0 * pooled;
    detail += fmt("; %s %.5f+-%.5f margin %.5f vs 2*pooled SE %.5f", c->spec.label().c_str(),
                  m.mean, m.se, margin, 2.0 * pooled);
  }
  report("ordering_vs_trainable_scalar", ok, detail);

  const auto grid = test_grid_for(cfg);
  const double lo = 0.0, hi = 4.0 * std::numbers::pi;
  auto region_mean = [&](const RunSpec& spec) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const RunResult& r : sweep.runs_of(spec)) {
      if (r.curve.diverged) continue;
      sum += restricted_mse(grid, predictions_for(cfg, r), lo, hi);
      ++n;
    }
    return n ? sum / static_cast<double>(n) : std::nan("");
  };
  const double r_cc = region_mean(cc->spec), r_sts = region_mean(sts->spec);
  report("right_half_region", r_cc < r_sts,
         fmt("restricted MSE on [0, 4pi]: ConvexCombined %.5f, StandardTrainableScalar %.5f", r_cc,
             r_sts));
}

void alpha_parity(const SweepConfig& base) {
  SweepConfig cfg = base;
  cfg.epochs = 9 * cfg.eval_every;
  double worst = 0.0;
  bool ok = true;
  for (double lr : cfg.lr_grid) {
    const RunResult a = execute_run(cfg, RunSpec{ResidualKind::Standard, 16, lr, std::nullopt}, 0);
    const RunResult b = execute_run(cfg, RunSpec{ResidualKind::ConvexCombined, 16, lr, -30.0}, 0);
    ok = ok && a.curve.size() == 10 && b.curve.size() == 10;
    for (std::size_t i = 0; i < std::min(a.curve.size(), b.curve.size()); ++i) {
      worst = std::max(worst, std::abs(a.curve.test_mse[i] - b.curve.test_mse[i]));
    }
  }
  report("alpha_parity", ok && worst <= 1e-6,
         fmt("max |MSE difference| over the first 10 evaluations, every lr: %.3g", worst));
}

void determinism(const SweepConfig& cfg, const fs::path& first, const fs::path& second,
                 std::size_t other_workers) {
  const RunSpec spec{ResidualKind::ConvexCombined, 16, 0.125, 3.0};
  const RunResult a = execute_run(cfg, spec, 3), b = execute_run(cfg, spec, 3);
  const std::string ra = rows_of(a), rb = rows_of(b);
  const std::string sweep_rows = slurp(first / "runs.csv");
  const bool rows_ok = ra == rb && sweep_rows.find(ra) != std::string::npos;

  sweep_into(cfg, second, other_workers);
  const std::string agg1 = slurp(first / "agg.csv"), agg2 = slurp(second / "agg.csv");
  const bool agg_ok = !agg1.empty() && agg1 == agg2;
  report("determinism", rows_ok && agg_ok,
         fmt("repeated run rows identical and present in runs.csv: %s; agg.csv identical across "
             "worker counts: %s",
             rows_ok ? "yes" : "no", agg_ok ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path cache = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_cache");
  fs::create_directories(cache);

  theorem_campaign();
  plane_wave_reversal();
  autodiff_oracle();
  unit_sum_property();

  const SweepConfig cfg = desk_sweep();
  alpha_parity(cfg);

  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::max<std::size_t>(2, hw);
  const SweepResult sweep = sweep_into(cfg, cache / "desk", workers);
  ordering_checks(cfg, sweep);
  determinism(cfg, cache / "desk", cache / "desk_single_worker", 1);

  lines += fmt("acceptance complete: %d criteria, %d failed\n", checks, failures);
  std::fputs(lines.c_str() + lines.rfind("acceptance complete"), stdout);
  std::ofstream(cache / "acceptance_report.txt") << lines;
  return failures == 0 ? 0 : 1;
}
