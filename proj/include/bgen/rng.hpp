#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace bgen {

// FNV-1a over a string; used to derive independent deterministic RNG streams
// (per tensor, per task) from one top-level seed without stream overlap.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = fnv1a(name);
  // splitmix64-style finalizer over the combined value
  std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Canonical 53-bit double in [0,1); avoids the implementation-defined
// behavior of the standard distributions where byte determinism matters.
inline double unit_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Box-Muller standard normal built on unit_real, for the same reason.
inline double gaussian(std::mt19937_64& rng) {
  double u1 = 0.0;
  do {
    u1 = unit_real(rng);
  } while (u1 <= 0.0);
  const double u2 = unit_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Fisher-Yates with explicit draws, for stream stability across stdlibs.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace bgen
