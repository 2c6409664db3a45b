#pragma once

// Keyed random substreams. Every random decision draws from a stream derived
// from (seed, tick, vehicle, purpose), so results never depend on the order in
// which vehicles or coalitions are processed.

#include <cstdint>
#include <random>

namespace sdvc {

enum class StreamPurpose : std::uint64_t {
  CandidateTie = 1,
  PriorityEpsilon = 2,
  ScenarioGeneration = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  RandomStream(std::uint64_t seed, std::uint64_t tick, std::uint64_t vehicle, StreamPurpose purpose)
      : engine_(mix(seed, tick, vehicle, static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n). The standard distributions are not
  /// bit-reproducible across library vendors, hence the explicit rejection loop.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

 private:
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tick, std::uint64_t vehicle, std::uint64_t purpose) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ tick);
    h = splitmix64(h ^ (vehicle << 8) ^ purpose);
    return h;
  }

  std::mt19937_64 engine_;
};

}  // namespace sdvc
