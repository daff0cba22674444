#pragma once

#include <array>
#include <cstdint>

namespace gradres {

/// One step of splitmix64: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stateless splitmix64 finalizer of `x` (one step from state x).
std::uint64_t splitmix64_mix(std::uint64_t x);

/// xoshiro256** seeded by four splitmix64 outputs of a 64-bit seed.
///
/// Every draw is defined bit-for-bit here (no std:: distributions), so a
/// seed reproduces the same stream on every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  /// 53-bit uniform in [0, 1).
  double uniform01();
  /// 53-bit uniform in (0, 1].
  double uniform_open01();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller. Each pair of uniforms yields two
  /// variates; the second is cached and returned by the next call.
  double gaussian();

  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gradres
