#pragma once

#include <cstdint>
#include <random>

namespace tactile {

// splitmix64 mixing step; used to fold (seed, unit index) into child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for an independent unit of work. Parallel units each seed their
// own stream from (seed, unit), so results do not depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t unit) {
  return splitmix64(splitmix64(seed) ^ splitmix64(unit + 0x517cc1b727220a95ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace tactile
