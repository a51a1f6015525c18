#pragma once

// Seeding scheme shared by every sampler in the library.
//
// A (seed, stream) pair is mixed with SplitMix64 into the seed of a
// std::mt19937_64 engine; normal variates come from std::normal_distribution.
// Results are bit-stable for one standard library implementation. Parallel
// code assigns one stream per chunk or replicate, never per thread, so output
// does not depend on the number of workers.

#include <algorithm>
#include <cstdint>
#include <random>
#include <thread>

namespace nss {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20160901;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` of master seed `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return Engine(derive_seed(seed, stream));
}

inline unsigned default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace nss
