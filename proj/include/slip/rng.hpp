#pragma once

#include <cstdint>
#include <string_view>

namespace slip {

// Deterministic across platforms; the standard library's distributions are
// implementation-defined, which would break byte-identical corpora.

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Small seedable generator; one independent stream per (seed, key) pair.
class rng {
 public:
  explicit rng(uint64_t seed) : state_(seed) {}
  rng(uint64_t seed, std::string_view key) : state_(seed ^ fnv1a64(key)) {
    // decorrelate nearby seeds
    splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform real in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n); n must be positive.
  uint64_t below(uint64_t n) {
    // multiply-shift mapping; bias is far below anything observable here
    unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(wide >> 64);
  }

  // UniformRandomBitGenerator so std::shuffle can consume it if ever needed
  using result_type = uint64_t;
  static constexpr uint64_t min() { return 0; }
  static constexpr uint64_t max() { return ~0ull; }
  uint64_t operator()() { return next_u64(); }

 private:
  uint64_t state_;
};

}  // namespace slip
