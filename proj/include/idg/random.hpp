#pragma once

// Counter-based random helpers. Values depend only on their inputs, never on
// call order, so parallel loops stay reproducible.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "idg/core.hpp"

namespace idg {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

template <class... Rest>
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return hash_combine(hash_combine(a, b), rest...);
}

/// Uniform in [0, 1).
constexpr double to_unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Uniformly distributed unit vector derived from a hash.
inline Vec3 unit_direction(std::uint64_t h) {
  double z = 2.0 * to_unit_interval(h) - 1.0;
  double phi = 2.0 * std::numbers::pi * to_unit_interval(splitmix64(h));
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

/// Direction used to separate the coincident pair {a,b}: the returned vector
/// applies to min(a,b); the partner receives its negation.
inline Vec3 coincident_direction(Index a, Index b) {
  Index lo = std::min(a, b), hi = std::max(a, b);
  Vec3 d = unit_direction(hash_combine(0x5eedc0de, lo, hi));
  return a == lo ? d : -d;
}

}  // namespace idg
