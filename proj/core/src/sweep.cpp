#include "gradres/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gradres/csv.hpp"
#include "gradres/rng.hpp"
#include "json.hpp"

namespace gradres {

namespace {

constexpr std::uint64_t kSeedIndexSalt = 0x6a09e667f3bcc909ULL;

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string run_rows(const RunResult& r) {
  std::ostringstream ss;
  csv::write_run_rows(ss, r.spec, r.seed_index, r.curve);
  return ss.str();
}

std::string best_json(const SweepResult& result) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& sel : result.best) {
    const AggregateCurve& agg = result.aggregates[sel.aggregate_index];
    nlohmann::ordered_json j;
    j["algorithm"] = std::string(to_string(sel.algorithm));
    j["d"] = sel.d;
    j["lr"] = agg.spec.lr;
    j["alpha_init"] = agg.spec.alpha_init ? nlohmann::ordered_json(*agg.spec.alpha_init) : nullptr;
    j["criterion"] = std::string(to_string(result.config.criterion));
    j["value"] = sel.value;
    j["n_runs"] = agg.n_runs;
    j["n_effective"] = agg.n_effective;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace

RunSeeds derive_run_seeds(const SweepConfig& cfg, std::size_t seed_index) {
  RunSeeds s;
  s.run = splitmix64_mix(cfg.base_seed ^ splitmix64_mix(kSeedIndexSalt + seed_index));
  std::uint64_t state = s.run;
  s.weights = splitmix64(state);
  s.shuffle = splitmix64(state);
  s.dataset = splitmix64_mix(cfg.dataset.seed ^ splitmix64_mix(kSeedIndexSalt + seed_index));
  return s;
}

ModelSpec model_spec_for(const SweepConfig& cfg, const RunSpec& spec, std::uint64_t weight_seed) {
  ModelSpec m;
  m.hidden_dim = spec.d;
  m.activation = cfg.activation;
  m.variant = ResidualVariantSpec::make(spec.algorithm, spec.d, spec.alpha_init);
  m.variant.normalize_grad = cfg.normalize_grad;
  m.variant.grad_retain = cfg.grad_retain;
  m.weight_init_seed = weight_seed;
  return m;
}

TrainConfig train_config_for(const SweepConfig& cfg, const RunSpec& spec, std::uint64_t shuffle_seed) {
  TrainConfig t;
  t.lr = spec.lr;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.epochs;
  t.eval_every = cfg.eval_every;
  t.seed = shuffle_seed;
  return t;
}

std::vector<Sample> test_grid_for(const SweepConfig& cfg) {
  return generate_test_grid(cfg.test_points, cfg.dataset.x_min, cfg.dataset.x_max);
}

RunResult execute_run(const SweepConfig& cfg, const RunSpec& spec, std::size_t seed_index) {
  const RunSeeds seeds = derive_run_seeds(cfg, seed_index);
  SinDatasetConfig ds = cfg.dataset;
  ds.seed = seeds.dataset;
  const std::vector<Sample> data = generate_dataset(ds);
  const std::vector<Sample> grid = test_grid_for(cfg);

  Model model = Model::build(model_spec_for(cfg, spec, seeds.weights));
  RunResult r;
  r.spec = spec;
  r.seed_index = seed_index;
  r.curve = train(model, data, grid, train_config_for(cfg, spec, seeds.shuffle));
  if (!r.curve.diverged) {
    std::vector<double> xs(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) xs[i] = grid[i].x;
    r.grid_predictions = model.predict(xs);
  }
  return r;
}

double restricted_mse(std::span<const Sample> grid, std::span<const double> predictions, double lo,
                      double hi) {
  if (grid.size() != predictions.size()) throw std::invalid_argument("grid and predictions differ in size");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].x < lo || grid[i].x > hi) continue;
    const double e = predictions[i] - grid[i].y;
    sum += e * e;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no grid points in the restricted range");
  return sum / static_cast<double>(n);
}

std::vector<double> predictions_for(const SweepConfig& cfg, const RunResult& run) {
  if (!run.grid_predictions.empty() || run.curve.diverged) return run.grid_predictions;
  return execute_run(cfg, run.spec, run.seed_index).grid_predictions;
}

std::span<const RunResult> SweepResult::runs_of(const RunSpec& spec) const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i] == spec) return std::span(runs).subspan(i * config.n_seeds, config.n_seeds);
  }
  throw std::out_of_range("grid point not part of this sweep: " + spec.label());
}

const AggregateCurve* SweepResult::best_for(ResidualKind algorithm, std::size_t d) const {
  for (const auto& sel : best) {
    if (sel.algorithm == algorithm && sel.d == d) return &aggregates[sel.aggregate_index];
  }
  return nullptr;
}

SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options) {
  cfg.validate();
  SweepResult result;
  result.config = cfg;
  result.specs = cfg.enumerate();
  const std::size_t n_seeds = cfg.n_seeds;
  const std::size_t total = result.specs.size() * n_seeds;

  std::vector<std::optional<RunResult>> slots(total);

  const bool to_disk = !options.out_dir.empty();
  const auto runs_path = options.out_dir / "runs.csv";
  if (to_disk) std::filesystem::create_directories(options.out_dir);

  if (to_disk && options.resume && std::filesystem::exists(runs_path)) {
    std::map<std::pair<std::string, std::size_t>, std::size_t> index;
    for (std::size_t i = 0; i < result.specs.size(); ++i) {
      for (std::size_t s = 0; s < n_seeds; ++s) index[{result.specs[i].label(), s}] = i * n_seeds + s;
    }
    std::ifstream in(runs_path, std::ios::binary);
    for (auto& loaded : csv::read_complete_runs(in, cfg.epochs)) {
      auto it = index.find({loaded.spec.label(), loaded.seed_index});
      if (it == index.end() || slots[it->second]) continue;
      RunResult r;
      r.spec = result.specs[it->second / n_seeds];
      r.seed_index = loaded.seed_index;
      r.curve = std::move(loaded.curve);
      slots[it->second] = std::move(r);
      ++result.resumed;
    }
  }

  // Rewrite the canonical prefix of what was reloaded; everything after it
  // is appended in order as it becomes available.
  std::size_t flushed = 0;
  std::ofstream runs_out;
  if (to_disk) {
    std::string head(csv::kRunsHeader);
    head += '\n';
    while (flushed < total && slots[flushed]) head += run_rows(*slots[flushed++]);
    write_file_atomic(runs_path, head);
    runs_out.open(runs_path, std::ios::binary | std::ios::app);
    if (!runs_out) throw std::runtime_error("cannot append to " + runs_path.string());
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < total; ++i) {
    if (!slots[i]) pending.push_back(i);
  }

  std::mutex mu;
  std::size_t done = result.resumed;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;

  auto flush_ready = [&] {
    while (flushed < total && slots[flushed]) {
      if (to_disk) {
        runs_out << run_rows(*slots[flushed]);
        runs_out.flush();
        if (!runs_out) throw std::runtime_error("write failed: " + runs_path.string());
      }
      ++flushed;
    }
  };

  auto worker = [&] {
    while (!failed) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const std::size_t slot = pending[k];
      try {
        RunResult r = execute_run(cfg, result.specs[slot / n_seeds], slot % n_seeds);
        std::lock_guard lock(mu);
        slots[slot] = std::move(r);
        ++done;
        flush_ready();
        if (options.progress) {
          options.progress(SweepProgress{done, total, result.resumed, &*slots[slot]});
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  {
    std::lock_guard lock(mu);
    flush_ready();
    if (options.progress && result.resumed > 0) {
      options.progress(SweepProgress{done, total, result.resumed, nullptr});
    }
  }
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, pending.size()));
  if (!pending.empty()) {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
  if (to_disk) runs_out.close();

  result.executed = pending.size();
  result.runs.reserve(total);
  for (auto& s : slots) result.runs.push_back(std::move(*s));

  for (std::size_t i = 0; i < result.specs.size(); ++i) {
    std::vector<LearningCurve> curves;
    for (std::size_t s = 0; s < n_seeds; ++s) curves.push_back(result.run(i, s).curve);
    try {
      result.aggregates.push_back(aggregate(result.specs[i], curves));
    } catch (const UnusableConfig&) {
      result.unusable.push_back(result.specs[i]);
    }
  }
  if (!result.aggregates.empty()) result.best = select_best(result.aggregates, cfg.criterion);

  if (to_disk) {
    std::ostringstream agg;
    csv::write_agg(agg, result.aggregates);
    write_file_atomic(options.out_dir / "agg.csv", agg.str());
    write_file_atomic(options.out_dir / "best.json", best_json(result));
    write_file_atomic(options.out_dir / "config.json", to_json(cfg) + "\n");

    if (options.write_function_files) {
      const std::vector<Sample> grid = test_grid_for(cfg);
      for (const auto& sel : result.best) {
        const RunSpec& spec = result.aggregates[sel.aggregate_index].spec;
        for (const RunResult& r : result.runs_of(spec)) {
          if (r.curve.diverged) continue;
          std::ostringstream fn;
          csv::write_function(fn, grid, predictions_for(cfg, r));
          write_file_atomic(options.out_dir / ("function_" + std::string(to_string(sel.algorithm)) +
                                               "_d" + std::to_string(sel.d) + ".csv"),
                            fn.str());
          break;
        }
      }
    }
  }
  return result;
}

}  // namespace gradres
