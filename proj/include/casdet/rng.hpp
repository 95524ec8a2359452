#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace casdet {

// splitmix64 finalizer. Good avalanche, cheap, and stable across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a, folded through mix64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

// Derived stream seeds: seed_i = hash(master, stream, i). Every parallel unit
// of work draws from its own derived seed so that parallel and serial
// execution produce identical results.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(master ^ hash_str(stream)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed ^ 0x5bf0363546e92557ULL));
}

}  // namespace casdet
