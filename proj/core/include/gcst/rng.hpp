#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gcst {

// FNV-1a. Used for cache keys, config hashes and sub-seed derivation, so the
// exact constants are part of the on-disk formats.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// One root seed drives every randomized component; sub-seeds are derived by
// purpose so adding a consumer does not shift the streams of the others.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
  return fnv1a64(purpose, fnv1a64_mix(0xcbf29ce484222325ULL, root));
}

// Uniform in [0, 1). mt19937_64 output is pinned by the standard, and we
// avoid std::uniform_* distributions because their sequences are not.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return n == 0 ? 0 : static_cast<std::size_t>(rng() % n);
}

}  // namespace gcst
