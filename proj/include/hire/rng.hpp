#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hire {

// Counter-based 64-bit generator (splitmix64). The i-th output is a pure
// function of (seed, i):
//
//   out_i = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
//   mix64: z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//          z ^= z >> 27; z *= 0x94D049BB133111EB;
//          z ^= z >> 31;
//
// Uniforms take the high 53 bits, so they are exact dyadic rationals and
// reproducible on any IEEE-754 platform. Gaussians are Box-Muller pairs
// over consecutive uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + ++counter_ * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal, Box-Muller. Consumes two uniforms per pair; the
  // second member of the pair is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  float next_gaussian_f() { return static_cast<float>(next_gaussian()); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream, e.g. one per sweep point or per trial.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xA5A5A5A55A5A5A5AULL + stream));
  return r.next_u64();
}

}  // namespace hire
