#pragma once

#include <cmath>
#include <cstdint>

namespace retrack {

// Counter-based random values: every draw is a pure function of the key
// words fed in, so callers get the same number regardless of query order.
// Mixing is the splitmix64 finalizer chained over the key.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t a) { return splitmix64(a); }

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ b);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(mix(a, b) ^ c);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return splitmix64(mix(a, b, c) ^ d);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                         std::uint64_t e) {
  return splitmix64(mix(a, b, c, d) ^ e);
}

// Uniform in (0, 1]: top 53 bits, shifted up by one ulp step so log() is safe.
inline double uniform_pos(std::uint64_t raw) {
  return static_cast<double>((raw >> 11) + 1) * 0x1.0p-53;
}

// Uniform in [0, 1).
inline double uniform(std::uint64_t raw) {
  return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller from two raw words (cosine branch).
inline double gaussian(std::uint64_t raw_a, std::uint64_t raw_b) {
  const double u1 = uniform_pos(raw_a);
  const double u2 = uniform(raw_b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
}

}  // namespace rng
}  // namespace retrack
