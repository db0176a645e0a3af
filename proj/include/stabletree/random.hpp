#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stabletree {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// A position in the seed tree. Every random decision in the library draws
/// from a stream derived by hashing (root seed, labels, counters), so results
/// never depend on evaluation order or thread count.
class SeedPath {
 public:
  constexpr explicit SeedPath(std::uint64_t seed) : state_(mix64(seed)) {}

  [[nodiscard]] constexpr SeedPath child(std::string_view label) const {
    return SeedPath(state_, fnv1a64(label));
  }
  [[nodiscard]] constexpr SeedPath child(std::uint64_t counter) const {
    return SeedPath(state_, mix64(counter ^ 0x5851f42d4c957f2dULL));
  }

  [[nodiscard]] constexpr std::uint64_t value() const { return state_; }

  [[nodiscard]] std::mt19937_64 engine() const { return std::mt19937_64(state_); }

 private:
  constexpr SeedPath(std::uint64_t parent, std::uint64_t salt)
      : state_(mix64(parent ^ mix64(salt))) {}

  std::uint64_t state_;
};

/// Uniform double in [0, 1) from the top 53 bits; portable across standard
/// library implementations unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  // Lemire's multiply-shift; bias is below 2^-64 * n and irrelevant here.
  __extension__ using u128 = unsigned __int128;
  return static_cast<std::size_t>((static_cast<u128>(rng()) * n) >> 64);
}

}  // namespace stabletree
