#pragma once

#include <cstdint>
#include <random>

namespace platoon_marl {

/// All stochastic components draw from explicitly passed engines of this type.
using Rng = std::mt19937_64;

/// Named sub-streams so that consuming randomness in one subsystem never
/// shifts the sequence seen by another.
enum class Stream : std::uint64_t {
  environment = 1,
  exploration = 2,
  replay = 3,
  init = 4,
  smoothing = 5,
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return make_rng(seed, static_cast<std::uint64_t>(stream));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

}  // namespace platoon_marl
