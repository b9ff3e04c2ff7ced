#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lcbo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named sub-streams derived from one base seed, so that e.g. observation
// noise and acquisition restarts never share engine state.
enum class Stream : std::uint64_t {
  ColdStart = 1,
  Noise = 2,
  Acquisition = 3,
  Rff = 4,
  RandomSearch = 5,
  Misc = 6,
};

inline std::uint64_t derive_seed(std::uint64_t base_seed, Stream stream) {
  return splitmix64(base_seed ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

// mt19937_64 with hand-rolled uniform/normal transforms. The standard
// distributions are implementation-defined, which would break the
// bitwise-reproducibility contract across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_stream(std::uint64_t base_seed, Stream stream) {
    return Rng(derive_seed(base_seed, stream));
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // One Box-Muller draw per call; always consumes exactly two engine outputs.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();  // guard log(0)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lcbo
