#pragma once

// Deterministic randomness shared by server and client. The exact draw
// discipline is part of the wire contract (docs/wire-format.md): any peer
// that derives the same per-step seed must produce bit-identical ensembles.

#include <cmath>
#include <cstdint>
#include <random>

namespace simsync {

/// Per-step seed schedule: a splitmix64-style avalanche of the session's
/// basic seed mixed with the step number.
struct SeedPolicy {
  std::uint64_t basic_seed = 0;

  std::uint64_t derive(std::uint64_t step) const {
    std::uint64_t z = basic_seed ^ (step * 0x9E3779B97F4A7C15ULL);
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }
};

/// Standard-normal stream over MT19937-64. Each normal consumes exactly two
/// raw 64-bit draws (Box-Muller, cosine branch only); uniforms take the top
/// 53 bits, with u1 shifted into (0, 1] so the log is always finite.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

  double next() {
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::mt19937_64 gen_;
};

}  // namespace simsync
