#pragma once

#include <cmath>
#include <cstdint>

namespace dlvmc {

/// Counter-based RNG: every draw is a pure function of (seed, stream, a, b, c).
/// Walkers, electrons and steps index the counters directly, so trajectories
/// do not depend on thread scheduling and the only mutable sampler state is
/// the step counter.
enum class RngStream : std::uint64_t {
  ParamInit = 1,
  WalkerInit = 2,
  Proposal = 3,
  Accept = 4,
  MixtureChoice = 5,
  Misc = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t rng_word(std::uint64_t seed, RngStream stream, std::uint64_t a,
                              std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed ^ 0xD6E8FEB86659FD93ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

/// Uniform in (0, 1]; safe under log().
inline double rng_uniform(std::uint64_t seed, RngStream stream, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  return (double((rng_word(seed, stream, a, b, c) >> 11)) + 1.0) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two decorrelated counter words.
inline double rng_gaussian(std::uint64_t seed, RngStream stream, std::uint64_t a,
                           std::uint64_t b, std::uint64_t c) {
  const double u1 = rng_uniform(seed, stream, a, b, 2 * c);
  const double u2 = rng_uniform(seed, stream, a, b, 2 * c + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace dlvmc
