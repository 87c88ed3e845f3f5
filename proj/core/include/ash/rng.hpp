#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ash {

/// Deterministic seed derivation. Every consumer of randomness draws from its
/// own stream keyed by (master seed, purpose tag, index), so reordering or
/// parallelizing work never shifts anyone else's numbers.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
  return splitmix64(master ^ splitmix64(fnv1a64(tag) ^ splitmix64(index)));
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view tag, uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, tag, index));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(std::mt19937_64& rng, double mean = 0.0, double stddev = 1.0) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace ash
