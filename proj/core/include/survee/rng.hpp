#pragma once

#include <cstdint>
#include <random>

namespace survee::rng {

/// splitmix64 step; used to derive well-separated seeds for substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream.
///
/// Uniform variates are produced from the top 53 bits of a mt19937_64 draw,
/// so sequences are identical on every platform for a given seed.  Substreams
/// derived from (seed, index) are used for parallel bootstrap replicates and
/// simulation iterations: results do not depend on the worker count.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for replicate `index` of a run seeded with `seed`.
  /// `domain` separates uses (cohorts vs bootstrap vs truth draws).
  static Stream substream(std::uint64_t seed, std::uint64_t index,
                          std::uint64_t domain = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= index + 0x632be59bd9b4e019ULL;
    std::uint64_t b = splitmix64(s);
    s ^= domain + 0x9e6c63d0876a9a47ULL;
    std::uint64_t c = splitmix64(s);
    return Stream(a ^ (b * 0xff51afd7ed558ccdULL) ^ (c << 1));
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); rejects the (probability 2^-53) exact zero.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Uniform on (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  /// Integer in [0, n) via the floor(u * n) map; n must be positive.
  std::int64_t below(std::int64_t n) {
    return static_cast<std::int64_t>(uniform() * static_cast<double>(n));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace survee::rng
