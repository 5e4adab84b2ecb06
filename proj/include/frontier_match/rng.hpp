#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace frontier_match::rng {

// splitmix64 step (Vigna). Used to derive independent substream seeds so that
// per-record / per-replicate / per-individual streams do not depend on
// evaluation order or scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fold a root seed and any number of stream indices into one substream seed.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = root ^ 0xa0761d6478bd642fULL;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t p : parts) {
    state ^= p + 0x8ebc6af09c88c6e3ULL;
    out = splitmix64(state);
  }
  return out;
}

inline std::mt19937_64 make_engine(std::uint64_t root,
                                   std::initializer_list<std::uint64_t> parts = {}) {
  return std::mt19937_64(derive_seed(root, parts));
}

}  // namespace frontier_match::rng
