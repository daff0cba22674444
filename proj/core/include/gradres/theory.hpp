#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gradres {

class Rng;

namespace theory {

using Point = std::vector<double>;

/// Absolute slack used for every inequality comparison in this module.
inline constexpr double kComparisonSlack = 1e-9;

/// Domain errors: degenerate gradients, epsilon >= 1, bad band.
class TheoryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// (1 - eps) L <= T: the reversal bound is vacuous.
class AssumptionViolation : public TheoryError {
 public:
  using TheoryError::TheoryError;
};

/// a * cos(xi . x + phase)
struct PlaneWave {
  double amplitude = 0.0;
  Point frequency;
  double phase = 0.0;
};

/// Finite sum of real cosine waves on R^d.
///
/// Frequencies are stored in canonical sign form (first nonzero component
/// positive); a wave given with the opposite sign is flipped together with
/// its phase, which leaves the function unchanged.
class PlaneWaveSum {
 public:
  explicit PlaneWaveSum(std::size_t dim);

  void add(double amplitude, Point frequency, double phase);
  void add(const PlaneWave& wave) { add(wave.amplitude, wave.frequency, wave.phase); }

  std::size_t dim() const { return dim_; }
  const std::vector<PlaneWave>& waves() const { return waves_; }
  bool empty() const { return waves_.empty(); }

  double operator()(const Point& x) const;

 private:
  std::size_t dim_;
  std::vector<PlaneWave> waves_;
};

/// The ball B(omega u, delta) in frequency space.
struct BandSpec {
  Point u;
  double omega = 1.0;
  double delta = 0.1;

  /// |u| = 1 within 1e-12, omega > 0, 0 < delta < omega.
  void validate() const;
  /// True when xi or -xi lies in the band (a real wave occupies both).
  bool contains(const Point& xi) const;
};

struct BandSplit {
  PlaneWaveSum high;
  PlaneWaveSum low;
};

BandSplit band_split(const PlaneWaveSum& f, const BandSpec& band);

/// Analytic gradient: -sum_j a_j sin(xi_j . x + phase_j) xi_j.
Point grad_at(const PlaneWaveSum& f, const Point& x);

/// Discrete band mass: sum_j |a_j| |xi_j|.
double band_mass(const PlaneWaveSum& f_high);

/// Distortion T = pi (delta / omega) M: bounds |grad f_h(x0) + grad f_h(x1)|.
double distortion(const BandSpec& band, double mass);

/// 2 (T + 2 eps L) / ((1 - eps) L - T); throws AssumptionViolation unless
/// (1 - eps) L > T.
double reversal_bound(double L, double eps, double distortion);

struct ReversalReport {
  Point x0;
  Point x1;
  double L = 0.0;
  double eps = 0.0;
  double band_mass = 0.0;
  double distortion = 0.0;
  double measured_sum_norm = 0.0;
  std::optional<double> bound_rhs;  // empty when Assumption 3 fails
  double angle = 0.0;
  bool assumption3_ok = false;
  bool bound_holds = false;

  // Intermediate bounds: |grad f_h(x0) + grad f_h(x1)| <= T, |grad f(x0)| >= (1-eps)L,
  // |grad f(x1)| >= (1-eps)L - T.
  double high_sum_norm = 0.0;
  double grad_norm_x0 = 0.0;
  double grad_norm_x1 = 0.0;
  bool lemma1_holds = false;
  bool lemma2_holds = false;

  double mass_over_L() const { return band_mass / L; }
};

/// Evaluates every quantity of the gradient-reversal bound at x0 and
/// x1 = x0 + (pi / omega) u.
ReversalReport verify_reversal(const PlaneWaveSum& f, const BandSpec& band, const Point& x0);

struct UnitSumResult {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = |a/|a| + b/|b||, rhs = 2 |a + b| / min(|a|, |b|).
UnitSumResult unit_sum_inequality(const Point& a, const Point& b);

/// True iff bound_rhs <= 2 sin(eta / 2); eta must lie in (0, pi).
bool angle_guarantee(double bound_rhs, double eta);

/// Angle in [0, pi] between nonzero vectors, via atan2 so that angles near
/// pi keep full precision.
double angle_between(const Point& a, const Point& b);

double norm(const Point& v);

/// One randomized test function with its band and base point.
struct CampaignTrial {
  std::uint64_t seed = 0;
  PlaneWaveSum f{1};
  BandSpec band;
  Point x0;
  std::size_t x0_resamples = 0;
};

/// Draws a band-dominated plane-wave sum: one carrier at omega u with
/// |a| in [1, 4] and omega in [8, 64], up to three sidebands inside the band
/// (delta in [0.01, 0.1] omega), and one to eight waves with |xi| <= 2 whose
/// amplitudes are scaled so that eps <= 0.05. x0 is redrawn until
/// |grad f_h(x0)| >= 0.5 |a| omega; returns nullopt after `max_resamples`
/// failures.
std::optional<CampaignTrial> generate_trial(std::uint64_t seed, std::size_t max_resamples = 256);

/// A single cos(omega u . x + phase) with a narrow band around it and an x0
/// where its gradient is clearly nonzero.
CampaignTrial generate_plane_wave_trial(std::uint64_t seed);

struct CampaignSummary {
  std::size_t trials = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::size_t x0_resamples = 0;
  std::size_t assumption3_ok = 0;
  std::size_t bound_violations = 0;
  std::size_t lemma1_violations = 0;
  std::size_t lemma2_violations = 0;
  std::size_t identity_violations = 0;
  std::size_t angle_violations = 0;

  std::size_t passes() const { return assumption3_ok - bound_violations; }
  bool clean() const {
    return bound_violations + lemma1_violations + lemma2_violations + identity_violations +
               angle_violations ==
           0;
  }
};

/// |measured - 2 cos(angle/2)| for a report.
double angle_identity_error(const ReversalReport& report);

/// Runs `trials` independent trials seeded from `base_seed`; `on_report`
/// receives each evaluated trial.
CampaignSummary run_campaign(
    std::size_t trials, std::uint64_t base_seed,
    const std::function<void(const CampaignTrial&, const ReversalReport&)>& on_report = {});

}  // namespace theory
}  // namespace gradres
