#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace cqsim {

// Deterministic random source. mt19937_64 is fully specified by the standard;
// the distributions are implemented here instead of using <random>'s, whose
// algorithms are implementation-defined, so output is identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream keyed by a master seed and a tag path.
  static Rng derive(std::uint64_t seed, std::string_view tag, std::uint64_t a = 0,
                    std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean, double sd);

  /// Normal restricted to [lo, hi] by rejection; falls back to clamping the
  /// mean when the interval carries almost no mass.
  double truncated_normal(double mean, double sd, double lo, double hi);

  /// Index drawn proportionally to non-negative weights; weights must not all be zero.
  std::size_t weighted(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t hash_string(std::string_view s) noexcept;

}  // namespace cqsim
