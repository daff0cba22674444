// gradres command-line entry point.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gradres/config.hpp"
#include "gradres/csv.hpp"
#include "gradres/sweep.hpp"
#include "gradres/theory.hpp"
#include "json.hpp"

namespace {

using namespace gradres;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonFlags {
  std::string config;
  std::string preset = "desk";
  std::string out;
};

SweepConfig load_sweep(const CommonFlags& f) {
  const SweepConfig base = preset(f.preset);
  return f.config.empty() ? base : parse_sweep_config(read_file(f.config), base);
}

SingleRunConfig load_run(const CommonFlags& f) {
  if (f.config.empty()) throw ConfigError("--config is required for a single run");
  return parse_run_config(read_file(f.config), preset(f.preset));
}

void write_to(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

nlohmann::ordered_json point_json(const theory::Point& p) { return nlohmann::ordered_json(p); }

nlohmann::ordered_json report_json(const theory::CampaignTrial& t, const theory::ReversalReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = t.seed;
  j["x0"] = point_json(r.x0);
  j["x1"] = point_json(r.x1);
  j["L"] = r.L;
  j["eps"] = r.eps;
  j["band_mass"] = r.band_mass;
  j["mass_over_L"] = r.mass_over_L();
  j["distortion"] = r.distortion;
  j["measured_sum_norm"] = r.measured_sum_norm;
  j["bound_rhs"] = r.bound_rhs ? nlohmann::ordered_json(*r.bound_rhs) : nullptr;
  j["angle"] = r.angle;
  j["assumption3_ok"] = r.assumption3_ok;
  j["bound_holds"] = r.bound_holds;
  j["high_sum_norm"] = r.high_sum_norm;
  j["grad_norm_x0"] = r.grad_norm_x0;
  j["grad_norm_x1"] = r.grad_norm_x1;
  j["lemma1_holds"] = r.lemma1_holds;
  j["lemma2_holds"] = r.lemma2_holds;
  j["x0_resamples"] = t.x0_resamples;
  return j;
}

int cmd_train(const CommonFlags& f) {
  const SingleRunConfig rc = load_run(f);
  const RunResult r = execute_run(rc.common, rc.spec, rc.seed_index);
  std::ostringstream rows;
  rows << csv::kRunsHeader << '\n';
  csv::write_run_rows(rows, r.spec, r.seed_index, r.curve);
  if (f.out.empty()) {
    std::cout << rows.str();
  } else {
    std::filesystem::create_directories(f.out);
    write_to((std::filesystem::path(f.out) / "runs.csv").string(), rows.str());
    if (!r.curve.diverged) {
      std::ostringstream fn;
      csv::write_function(fn, test_grid_for(rc.common), r.grid_predictions);
      write_to((std::filesystem::path(f.out) / "function.csv").string(), fn.str());
    }
  }
  std::fprintf(stderr, "%s seed %zu: %s\n", rc.spec.label().c_str(), rc.seed_index,
               r.curve.diverged ? "diverged"
                                : ("final test MSE " + csv::format_double(r.curve.test_mse.back())).c_str());
  return 0;
}

int cmd_sweep(const CommonFlags& f, std::size_t workers, bool fresh) {
  if (f.out.empty()) throw ConfigError("--out is required for a sweep");
  const SweepConfig cfg = load_sweep(f);
  SweepOptions opt;
  opt.out_dir = f.out;
  opt.workers = workers;
  opt.resume = !fresh;
  opt.progress = [](const SweepProgress& p) {
    if (p.last) {
      std::fprintf(stderr, "[%zu/%zu] %s seed %zu%s\n", p.done, p.total, p.last->spec.label().c_str(),
                   p.last->seed_index, p.last->curve.diverged ? " (diverged)" : "");
    } else {
      std::fprintf(stderr, "resumed %zu of %zu runs\n", p.resumed, p.total);
    }
  };
  const SweepResult res = run_sweep(cfg, opt);
  for (const auto& sel : res.best) {
    const RunSpec& s = res.aggregates[sel.aggregate_index].spec;
    std::fprintf(stderr, "best %s d=%zu: lr=%g alpha=%s %s=%.6g\n", std::string(to_string(sel.algorithm)).c_str(),
                 sel.d, s.lr, s.alpha_init ? csv::format_double(*s.alpha_init).c_str() : "-",
                 std::string(to_string(cfg.criterion)).c_str(), sel.value);
  }
  for (const auto& s : res.unusable) std::fprintf(stderr, "unusable: %s\n", s.label().c_str());
  return res.runs.size() == res.specs.size() * cfg.n_seeds ? 0 : 1;
}

int cmd_verify_theory(std::size_t trials, std::uint64_t seed) {
  const auto summary = theory::run_campaign(trials, seed, [](const auto& t, const auto& r) {
    std::cout << report_json(t, r).dump() << '\n';
  });
  nlohmann::ordered_json s;
  s["summary"] = true;
  s["trials"] = summary.trials;
  s["evaluated"] = summary.evaluated;
  s["passes"] = summary.passes();
  s["skips"] = summary.skipped + (summary.evaluated - summary.assumption3_ok);
  s["assumption3_ok"] = summary.assumption3_ok;
  s["bound_violations"] = summary.bound_violations;
  s["lemma1_violations"] = summary.lemma1_violations;
  s["lemma2_violations"] = summary.lemma2_violations;
  s["identity_violations"] = summary.identity_violations;
  s["angle_violations"] = summary.angle_violations;
  std::cout << s.dump() << '\n';
  return summary.clean() ? 0 : 1;
}

int cmd_dump_dataset(const CommonFlags& f, std::size_t seed_index) {
  const SweepConfig cfg = load_sweep(f);
  SinDatasetConfig ds = cfg.dataset;
  ds.seed = derive_run_seeds(cfg, seed_index).dataset;
  std::ostringstream out;
  csv::write_dataset(out, generate_dataset(ds));
  write_to(f.out, out.str());
  return 0;
}

int cmd_dump_function(const CommonFlags& f) {
  const SingleRunConfig rc = load_run(f);
  const RunResult r = execute_run(rc.common, rc.spec, rc.seed_index);
  if (r.curve.diverged) {
    std::fprintf(stderr, "run diverged at epoch %zu; no function to dump\n", r.curve.diverged_epoch.value_or(0));
    return 1;
  }
  std::ostringstream out;
  csv::write_function(out, test_grid_for(rc.common), r.grid_predictions);
  write_to(f.out, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient residual connections: training, sweeps and theory checks"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  bool fresh = false;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t seed_index = 0;

  auto add_common = [&](CLI::App* sub, bool with_out = true) {
    sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", flags.preset, "Base preset")->check(CLI::IsMember({"desk", "paper"}));
    if (with_out) sub->add_option("--out", flags.out, "Output directory or file ('-' for stdout)");
  };

  auto* train = app.add_subcommand("train", "Train a single (config, seed) run");
  add_common(train);
  auto* sweep = app.add_subcommand("sweep", "Run a full sweep with aggregation and selection");
  add_common(sweep);
  sweep->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--fresh", fresh, "Ignore an existing runs.csv instead of resuming");
  auto* theory_cmd = app.add_subcommand("verify-theory", "Randomized check of the gradient-reversal bound");
  theory_cmd->add_option("--trials", trials, "Number of trials");
  theory_cmd->add_option("--seed", seed, "Base seed");
  auto* dump_ds = app.add_subcommand("dump-dataset", "Write the training set of one seed as CSV");
  add_common(dump_ds);
  dump_ds->add_option("--seed-index", seed_index, "Seed index within the sweep");
  auto* dump_fn = app.add_subcommand("dump-function", "Train one run and write x,y_star,y_pred");
  add_common(dump_fn);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(flags);
    if (*sweep) return cmd_sweep(flags, workers, fresh);
    if (*theory_cmd) return cmd_verify_theory(trials, seed);
    if (*dump_ds) return cmd_dump_dataset(flags, seed_index);
    if (*dump_fn) return cmd_dump_function(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
