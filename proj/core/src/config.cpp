#include "gradres/config.hpp"

#include <cstdio>
#include <set>

#include "json.hpp"

namespace gradres {

namespace {

using nlohmann::json;

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T get(const json& obj, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void apply_dataset(const json& j, SinDatasetConfig& ds) {
  reject_unknown(j, {"n", "noise_std", "x_min", "x_max", "seed"}, "dataset");
  if (j.contains("n")) ds.n = get<std::size_t>(j, "n");
  if (j.contains("noise_std")) ds.noise_std = get<double>(j, "noise_std");
  if (j.contains("x_min")) ds.x_min = get<double>(j, "x_min");
  if (j.contains("x_max")) ds.x_max = get<double>(j, "x_max");
  if (j.contains("seed")) ds.seed = get<std::uint64_t>(j, "seed");
}

const std::set<std::string> kCommonKeys = {
    "preset",     "base_seed",  "epochs",         "batch_size",  "eval_every", "test_points",
    "activation", "dataset",    "normalize_grad", "grad_retain", "criterion"};

void apply_common(const json& j, SweepConfig& cfg) {
  if (j.contains("base_seed")) cfg.base_seed = get<std::uint64_t>(j, "base_seed");
  if (j.contains("epochs")) cfg.epochs = get<std::size_t>(j, "epochs");
  if (j.contains("batch_size")) cfg.batch_size = get<std::size_t>(j, "batch_size");
  if (j.contains("eval_every")) cfg.eval_every = get<std::size_t>(j, "eval_every");
  if (j.contains("test_points")) cfg.test_points = get<std::size_t>(j, "test_points");
  if (j.contains("activation")) {
    try {
      cfg.activation = parse_activation(get<std::string>(j, "activation"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("dataset")) apply_dataset(j.at("dataset"), cfg.dataset);
  if (j.contains("normalize_grad")) cfg.normalize_grad = get<bool>(j, "normalize_grad");
  if (j.contains("grad_retain")) cfg.grad_retain = get<bool>(j, "grad_retain");
  if (j.contains("criterion")) {
    cfg.criterion = parse_selection_criterion(get<std::string>(j, "criterion"));
  }
}

ResidualKind kind_from(const std::string& name) {
  try {
    return parse_residual_kind(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::string_view to_string(SelectionCriterion c) {
  return c == SelectionCriterion::FinalWindowMean ? "final_window_mean" : "best_eval";
}

SelectionCriterion parse_selection_criterion(std::string_view name) {
  if (name == "final_window_mean") return SelectionCriterion::FinalWindowMean;
  if (name == "best_eval") return SelectionCriterion::BestEval;
  throw ConfigError("unknown selection criterion '" + std::string(name) + "'");
}

std::string RunSpec::label() const {
  std::string out(to_string(algorithm));
  out += "|d=" + std::to_string(d) + "|lr=" + exact(lr) + "|alpha=";
  out += alpha_init ? exact(*alpha_init) : "none";
  return out;
}

void SweepConfig::validate() const {
  if (algorithms.empty()) throw ConfigError("algorithms must not be empty");
  if (d_grid.empty()) throw ConfigError("d_grid must not be empty");
  if (lr_grid.empty()) throw ConfigError("lr_grid must not be empty");
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  for (std::size_t d : d_grid) {
    if (d == 0) throw ConfigError("d_grid entries must be positive");
  }
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("lr_grid entries must be positive");
  }
  for (ResidualKind k : algorithms) {
    if (sweeps_alpha_init(k) && alpha_init_grid.empty()) {
      throw ConfigError("alpha_init_grid must not be empty for " + std::string(to_string(k)));
    }
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (test_points < 2) throw ConfigError("test_points must be >= 2");
  try {
    dataset.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<RunSpec> SweepConfig::enumerate() const {
  std::vector<RunSpec> out;
  for (ResidualKind k : algorithms) {
    for (std::size_t d : d_grid) {
      for (double lr : lr_grid) {
        if (sweeps_alpha_init(k)) {
          for (double a : alpha_init_grid) out.push_back(RunSpec{k, d, lr, a});
        } else {
          out.push_back(RunSpec{k, d, lr, std::nullopt});
        }
      }
    }
  }
  return out;
}

SweepConfig preset(std::string_view name) {
  SweepConfig cfg;
  cfg.algorithms = {ResidualKind::Regular,        ResidualKind::Standard,
                    ResidualKind::StandardTrainableScalar, ResidualKind::GradOnly,
                    ResidualKind::ConvexCombined, ResidualKind::Addition,
                    ResidualKind::GradMagnitudeConcat};
  if (name == "desk") {
    cfg.d_grid = {16};
    cfg.n_seeds = 10;
    cfg.epochs = 2000;
  } else if (name == "paper") {
    cfg.d_grid = {16, 32, 64};
    cfg.n_seeds = 30;
    cfg.epochs = 5000;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
  }
  return cfg;
}

SweepConfig parse_sweep_config(std::string_view json_text, const SweepConfig& base) {
  const json j = parse(json_text);
  std::set<std::string> allowed = kCommonKeys;
  allowed.insert({"algorithms", "d_grid", "lr_grid", "alpha_init_grid", "n_seeds"});
  reject_unknown(j, allowed, "sweep config");

  SweepConfig cfg = j.contains("preset") ? preset(get<std::string>(j, "preset")) : base;
  if (j.contains("algorithms")) {
    cfg.algorithms.clear();
    for (const auto& name : get<std::vector<std::string>>(j, "algorithms")) {
      cfg.algorithms.push_back(kind_from(name));
    }
  }
  if (j.contains("d_grid")) cfg.d_grid = get<std::vector<std::size_t>>(j, "d_grid");
  if (j.contains("lr_grid")) cfg.lr_grid = get<std::vector<double>>(j, "lr_grid");
  if (j.contains("alpha_init_grid")) cfg.alpha_init_grid = get<std::vector<double>>(j, "alpha_init_grid");
  if (j.contains("n_seeds")) cfg.n_seeds = get<std::size_t>(j, "n_seeds");
  apply_common(j, cfg);
  cfg.validate();
  return cfg;
}

SingleRunConfig parse_run_config(std::string_view json_text, const SweepConfig& base) {
  const json j = parse(json_text);
  std::set<std::string> allowed = kCommonKeys;
  allowed.insert({"algorithm", "d", "lr", "alpha_init", "seed"});
  reject_unknown(j, allowed, "run config");

  SingleRunConfig out;
  out.common = j.contains("preset") ? preset(get<std::string>(j, "preset")) : base;
  apply_common(j, out.common);
  if (!j.contains("algorithm")) throw ConfigError("run config needs 'algorithm'");
  out.spec.algorithm = kind_from(get<std::string>(j, "algorithm"));
  out.spec.d = j.contains("d") ? get<std::size_t>(j, "d") : out.common.d_grid.front();
  out.spec.lr = j.contains("lr") ? get<double>(j, "lr") : out.common.lr_grid.front();
  if (sweeps_alpha_init(out.spec.algorithm)) {
    out.spec.alpha_init = j.contains("alpha_init") ? get<double>(j, "alpha_init") : 3.0;
  } else if (j.contains("alpha_init")) {
    throw ConfigError(std::string(to_string(out.spec.algorithm)) + " does not take alpha_init");
  }
  if (j.contains("seed")) out.seed_index = get<std::size_t>(j, "seed");
  if (out.spec.d == 0) throw ConfigError("d must be positive");
  if (!(out.spec.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  out.common.algorithms = {out.spec.algorithm};
  out.common.validate();
  return out;
}

std::string to_json(const SweepConfig& cfg) {
  json j;
  std::vector<std::string> algs;
  for (ResidualKind k : cfg.algorithms) algs.emplace_back(to_string(k));
  j["algorithms"] = algs;
  j["d_grid"] = cfg.d_grid;
  j["lr_grid"] = cfg.lr_grid;
  j["alpha_init_grid"] = cfg.alpha_init_grid;
  j["n_seeds"] = cfg.n_seeds;
  j["base_seed"] = cfg.base_seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["eval_every"] = cfg.eval_every;
  j["test_points"] = cfg.test_points;
  j["activation"] = std::string(to_string(cfg.activation));
  j["normalize_grad"] = cfg.normalize_grad;
  j["grad_retain"] = cfg.grad_retain;
  j["criterion"] = std::string(to_string(cfg.criterion));
  j["dataset"] = {{"n", cfg.dataset.n},
                  {"noise_std", cfg.dataset.noise_std},
                  {"x_min", cfg.dataset.x_min},
                  {"x_max", cfg.dataset.x_max},
                  {"seed", cfg.dataset.seed}};
  return j.dump(2);
}

}  // namespace gradres
