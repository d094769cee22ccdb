#pragma once

#include <cstdint>
#include <random>

namespace hdphlm {

// Every stochastic operation takes an explicit engine so runs are
// reproducible end to end from a single root seed.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Independent stream for (seed, iteration, worker) triples.  Workers running
// in parallel each own one of these, so thread scheduling cannot change the
// sampled values.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (a + 0x9e3779b97f4a7c15ULL));
  h = splitmix64(h ^ (b + 0x94d049bb133111ebULL));
  return Rng(h);
}

}  // namespace hdphlm
