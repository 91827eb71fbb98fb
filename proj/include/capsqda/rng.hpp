/**
 * @brief Seedable random streams.
 *
 * Every random quantity is drawn from a std::mt19937_64 whose seed is derived
 * from (master seed, index, purpose tag):
 *
 *     seed' = mix(mix(mix(master) ^ index) ^ fnv1a(purpose))
 *
 * with mix = SplitMix64 finalizer. A replication or fold can therefore be
 * re-run in isolation, and streams for different purposes never overlap in
 * how they are consumed.
 */
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace capsqda {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index, std::string_view purpose) {
  return splitmix64(splitmix64(splitmix64(master) ^ index) ^ fnv1a(purpose));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index, std::string_view purpose) {
  return Rng(stream_seed(master, index, purpose));
}

/// Fisher-Yates with a plain modulo draw, so the permutation depends only on
/// the engine output and not on the standard library's distributions.
template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace capsqda
