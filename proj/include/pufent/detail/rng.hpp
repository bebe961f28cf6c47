#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

// Portable random streams. The standard <random> distributions are
// implementation-defined, so the simulator draws through these instead to
// keep output files identical across toolchains.

namespace pufent::detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Order-sensitive combination of 64-bit keys.
template <typename... Keys>
constexpr std::uint64_t hash_keys(std::uint64_t first, Keys... rest) {
  std::uint64_t h = splitmix64(first);
  ((h = splitmix64(h ^ static_cast<std::uint64_t>(rest))), ...);
  return h;
}

/// Maps 64 random bits to a double in (0, 1).
inline double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal from a counter key (Box-Muller on two derived words).
inline double normal_from_key(std::uint64_t key) {
  const double u1 = to_open_unit(splitmix64(key ^ 0x5851F42D4C957F2Dull));
  const double u2 = to_open_unit(splitmix64(key ^ 0x14057B7EF767814Full));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential generator for the design builder (splitmix64 stream).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [lo, hi], Lemire's multiply-shift with rejection.
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t range = hi - lo + 1;
    if (range == 0) return next();
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next()) * range;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return lo + static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  double unit() { return to_open_unit(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace pufent::detail
