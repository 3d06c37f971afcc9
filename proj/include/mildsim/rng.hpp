#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mildsim {

/// Seedable, splittable random stream.
///
/// Algorithm (version-pinned, bit-reproducible on any IEEE-754 platform with a
/// correctly rounded libm):
///   key     = splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15))
///   engine  = std::mt19937_64 seeded with key (fully specified by the standard)
///   uniform = (engine() >> 11) * 2^-53, in [0, 1)
///   normal  = Box-Muller on (1 - u1, u2); the sine variate is cached for the next call
/// Distributions from <random> are not used: their output is implementation-defined.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64/box-muller v1";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child stream; depends only on (seed, this stream, child id).
  [[nodiscard]] Rng split(std::uint64_t child) const;

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// [0, 1)
  double uniform();
  /// (0, 1]
  double uniform_positive() { return 1.0 - uniform(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double exponential();
  /// Poisson(mean) by counting unit-rate exponential arrivals in [0, mean].
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a over a byte string; used for fingerprints and manifest hashes.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace mildsim
