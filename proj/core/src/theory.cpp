#include "gradres/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gradres/rng.hpp"

namespace gradres::theory {

namespace {

constexpr double kPi = std::numbers::pi;

double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Point plus(const Point& a, const Point& b) {
  Point out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Point minus(const Point& a, const Point& b) {
  Point out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Point scaled(const Point& a, double s) {
  Point out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Point unit_vector(Rng& rng, std::size_t d) {
  for (;;) {
    Point u(d);
    for (double& c : u) c = rng.gaussian();
    const double n = norm(u);
    if (n > 1e-3) return scaled(u, 1.0 / n);
  }
}

// Uniform point in the ball of radius r.
Point ball_point(Rng& rng, std::size_t d, double r) {
  const Point dir = unit_vector(rng, d);
  const double radius = r * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
  return scaled(dir, radius);
}

void check_dim(const PlaneWaveSum& f, const Point& x) {
  if (x.size() != f.dim()) {
    throw std::invalid_argument("point of dimension " + std::to_string(x.size()) +
                                " for a function on R^" + std::to_string(f.dim()));
  }
}

}  // namespace

double norm(const Point& v) { return std::sqrt(dot(v, v)); }

PlaneWaveSum::PlaneWaveSum(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("PlaneWaveSum needs dim >= 1");
}

void PlaneWaveSum::add(double amplitude, Point frequency, double phase) {
  if (frequency.size() != dim_) {
    throw std::invalid_argument("frequency of dimension " + std::to_string(frequency.size()) +
                                " for a function on R^" + std::to_string(dim_));
  }
  const auto lead = std::find_if(frequency.begin(), frequency.end(), [](double c) { return c != 0.0; });
  if (lead != frequency.end() && *lead < 0.0) {
    for (double& c : frequency) c = -c;
    phase = -phase;
  }
  waves_.push_back(PlaneWave{amplitude, std::move(frequency), phase});
}

double PlaneWaveSum::operator()(const Point& x) const {
  check_dim(*this, x);
  double s = 0.0;
  for (const auto& w : waves_) s += w.amplitude * std::cos(dot(w.frequency, x) + w.phase);
  return s;
}

void BandSpec::validate() const {
  if (u.empty() || std::abs(norm(u) - 1.0) > 1e-12) {
    throw TheoryError("band direction u must be a unit vector");
  }
  if (!(omega > 0.0)) throw TheoryError("band frequency omega must be positive");
  if (!(delta > 0.0) || !(delta < omega)) throw TheoryError("band width must satisfy 0 < delta < omega");
}

bool BandSpec::contains(const Point& xi) const {
  const Point center = scaled(u, omega);
  return norm(minus(xi, center)) <= delta || norm(plus(xi, center)) <= delta;
}

BandSplit band_split(const PlaneWaveSum& f, const BandSpec& band) {
  band.validate();
  if (band.u.size() != f.dim()) throw std::invalid_argument("band and function dimensions differ");
  BandSplit out{PlaneWaveSum(f.dim()), PlaneWaveSum(f.dim())};
  for (const auto& w : f.waves()) {
    (band.contains(w.frequency) ? out.high : out.low).add(w);
  }
  return out;
}

Point grad_at(const PlaneWaveSum& f, const Point& x) {
  check_dim(f, x);
  Point g(f.dim(), 0.0);
  for (const auto& w : f.waves()) {
    const double s = -w.amplitude * std::sin(dot(w.frequency, x) + w.phase);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * w.frequency[i];
  }
  return g;
}

double band_mass(const PlaneWaveSum& f_high) {
  double m = 0.0;
  for (const auto& w : f_high.waves()) m += std::abs(w.amplitude) * norm(w.frequency);
  return m;
}

double distortion(const BandSpec& band, double mass) {
  return kPi * (band.delta / band.omega) * mass;
}

double reversal_bound(double L, double eps, double distortion) {
  const double denom = (1.0 - eps) * L - distortion;
  if (!(denom > 0.0)) {
    throw AssumptionViolation("high-frequency dominance fails: (1-eps)L = " +
                              std::to_string((1.0 - eps) * L) + " <= T = " +
                              std::to_string(distortion));
  }
  return 2.0 * (distortion + 2.0 * eps * L) / denom;
}

double angle_between(const Point& a, const Point& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw TheoryError("angle of a zero vector");
  const Point ua = scaled(a, 1.0 / na), ub = scaled(b, 1.0 / nb);
  return 2.0 * std::atan2(norm(minus(ua, ub)), norm(plus(ua, ub)));
}

ReversalReport verify_reversal(const PlaneWaveSum& f, const BandSpec& band, const Point& x0) {
  check_dim(f, x0);
  const BandSplit split = band_split(f, band);

  ReversalReport r;
  r.x0 = x0;
  r.x1 = plus(x0, scaled(band.u, kPi / band.omega));

  const Point gh0 = grad_at(split.high, r.x0);
  const Point gh1 = grad_at(split.high, r.x1);
  r.L = norm(gh0);
  if (r.L == 0.0) throw TheoryError("high-frequency gradient vanishes at x0");
  r.eps = band_mass(split.low) / r.L;
  if (r.eps >= 1.0) throw TheoryError("low-frequency gradient bound eps >= 1");
  r.band_mass = band_mass(split.high);
  r.distortion = distortion(band, r.band_mass);

  const Point g0_raw = grad_at(f, r.x0);
  const Point g1_raw = grad_at(f, r.x1);
  r.grad_norm_x0 = norm(g0_raw);
  r.grad_norm_x1 = norm(g1_raw);
  if (r.grad_norm_x0 == 0.0 || r.grad_norm_x1 == 0.0) {
    throw TheoryError("gradient of f vanishes at x0 or x1");
  }
  const Point g0 = scaled(g0_raw, 1.0 / r.grad_norm_x0);
  const Point g1 = scaled(g1_raw, 1.0 / r.grad_norm_x1);
  r.measured_sum_norm = norm(plus(g0, g1));
  r.angle = angle_between(g0, g1);

  r.high_sum_norm = norm(plus(gh0, gh1));
  r.lemma1_holds = r.high_sum_norm <= r.distortion + kComparisonSlack;
  const double floor0 = (1.0 - r.eps) * r.L;
  r.lemma2_holds = r.grad_norm_x0 >= floor0 - kComparisonSlack &&
                   r.grad_norm_x1 >= floor0 - r.distortion - kComparisonSlack;

  r.assumption3_ok = floor0 > r.distortion;
  if (r.assumption3_ok) {
    r.bound_rhs = reversal_bound(r.L, r.eps, r.distortion);
    r.bound_holds = r.measured_sum_norm <= *r.bound_rhs + kComparisonSlack;
  }
  return r;
}

UnitSumResult unit_sum_inequality(const Point& a, const Point& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vectors of different dimension");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw TheoryError("unit-sum inequality needs nonzero vectors");
  UnitSumResult out;
  out.lhs = norm(plus(scaled(a, 1.0 / na), scaled(b, 1.0 / nb)));
  out.rhs = 2.0 * norm(plus(a, b)) / std::min(na, nb);
  return out;
}

bool angle_guarantee(double bound_rhs, double eta) {
  if (!(eta > 0.0 && eta < kPi)) throw std::invalid_argument("eta must lie in (0, pi)");
  return bound_rhs <= 2.0 * std::sin(eta / 2.0);
}

double angle_identity_error(const ReversalReport& report) {
  return std::abs(report.measured_sum_norm - 2.0 * std::cos(report.angle / 2.0));
}

std::optional<CampaignTrial> generate_trial(std::uint64_t seed, std::size_t max_resamples) {
  Rng rng(seed);
  const std::size_t d = 1 + rng.below(3);

  CampaignTrial trial;
  trial.seed = seed;
  trial.f = PlaneWaveSum(d);
  trial.band.u = unit_vector(rng, d);
  trial.band.omega = rng.uniform(8.0, 64.0);
  trial.band.delta = trial.band.omega * rng.uniform(0.01, 0.1);
  const double omega = trial.band.omega;
  const double carrier_amp = rng.uniform(1.0, 4.0);

  PlaneWaveSum high(d);
  high.add(carrier_amp, scaled(trial.band.u, omega), rng.uniform(0.0, 2.0 * kPi));
  const std::size_t sidebands = rng.below(4);
  for (std::size_t i = 0; i < sidebands; ++i) {
    const Point offset = ball_point(rng, d, trial.band.delta);
    high.add(carrier_amp * rng.uniform(0.05, 0.5), plus(scaled(trial.band.u, omega), offset),
             rng.uniform(0.0, 2.0 * kPi));
  }

  std::vector<PlaneWave> low;
  const std::size_t n_low = 1 + rng.below(8);
  for (std::size_t i = 0; i < n_low; ++i) {
    PlaneWave w;
    w.frequency = scaled(unit_vector(rng, d), rng.uniform(0.05, 2.0));
    w.amplitude = rng.uniform(0.1, 1.0);
    w.phase = rng.uniform(0.0, 2.0 * kPi);
    low.push_back(std::move(w));
  }

  const double required = 0.5 * carrier_amp * omega;
  for (;;) {
    Point x0(d);
    for (double& c : x0) c = rng.uniform(-kPi, kPi);
    if (norm(grad_at(high, x0)) >= required) {
      trial.x0 = std::move(x0);
      break;
    }
    if (++trial.x0_resamples > max_resamples) return std::nullopt;
  }

  // Scale the low band so that sum |a||xi| = eps_target * L.
  const double L = norm(grad_at(high, trial.x0));
  const double eps_target = rng.uniform(0.0, 0.05);
  double raw_mass = 0.0;
  for (const auto& w : low) raw_mass += std::abs(w.amplitude) * norm(w.frequency);
  const double factor = eps_target * L / raw_mass;

  for (const auto& w : high.waves()) trial.f.add(w);
  for (auto& w : low) {
    w.amplitude *= factor;
    trial.f.add(w);
  }
  return trial;
}

CampaignTrial generate_plane_wave_trial(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 1 + rng.below(3);
  CampaignTrial trial;
  trial.seed = seed;
  trial.f = PlaneWaveSum(d);
  trial.band.u = unit_vector(rng, d);
  trial.band.omega = rng.uniform(1.0, 64.0);
  trial.band.delta = 0.01 * trial.band.omega;
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const Point xi = scaled(trial.band.u, trial.band.omega);
  trial.f.add(rng.uniform(0.5, 4.0), xi, phase);
  for (;;) {
    Point x0(d);
    for (double& c : x0) c = rng.uniform(-kPi, kPi);
    if (std::abs(std::sin(dot(xi, x0) + phase)) >= 1e-3) {
      trial.x0 = std::move(x0);
      return trial;
    }
    ++trial.x0_resamples;
  }
}

CampaignSummary run_campaign(
    std::size_t trials, std::uint64_t base_seed,
    const std::function<void(const CampaignTrial&, const ReversalReport&)>& on_report) {
  CampaignSummary summary;
  for (std::size_t i = 0; i < trials; ++i) {
    ++summary.trials;
    const std::uint64_t seed = splitmix64_mix(base_seed + i);
    std::optional<CampaignTrial> trial = generate_trial(seed);
    if (!trial) {
      ++summary.skipped;
      continue;
    }
    summary.x0_resamples += trial->x0_resamples;
    ReversalReport report;
    try {
      report = verify_reversal(trial->f, trial->band, trial->x0);
    } catch (const TheoryError&) {
      ++summary.skipped;
      continue;
    }
    ++summary.evaluated;
    if (!report.lemma1_holds) ++summary.lemma1_violations;
    if (!report.lemma2_holds) ++summary.lemma2_violations;
    if (angle_identity_error(report) > 1e-10) ++summary.identity_violations;
    if (report.assumption3_ok) {
      ++summary.assumption3_ok;
      if (!report.bound_holds) ++summary.bound_violations;
      const double rhs = *report.bound_rhs;
      if (rhs < 2.0) {
        const double eta = std::max(2.0 * std::asin(rhs / 2.0), 1e-12);
        if (angle_guarantee(rhs, eta) && report.angle < kPi - eta - kComparisonSlack) {
          ++summary.angle_violations;
        }
      }
    }
    if (on_report) on_report(*trial, report);
  }
  return summary;
}

}  // namespace gradres::theory
