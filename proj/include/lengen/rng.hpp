#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lengen {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a
/// master seed so that any stage (or any sample index) can be regenerated
/// without replaying the others.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stage seed: one master seed expands into per-stage seeds
/// ("datagen", "init", "train", "eval", ...).
constexpr std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  return derive_seed(master, hash_tag(stage));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace lengen
