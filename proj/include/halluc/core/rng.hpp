#pragma once

#include <cstdint>
#include <random>

namespace halluc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive statistically independent child
/// seeds from a parent seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for `stream` under `parent`. Distinct streams of the same
/// parent never share state, so reseeding one stage leaves the others intact.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
  return mix64(mix64(parent) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Independent streams a master experiment seed is split into.
enum class SeedStream : std::uint64_t {
  data = 0,
  split = 1,
  gan = 2,
  classifier = 3,
};

constexpr std::uint64_t stream_seed(std::uint64_t master, SeedStream s) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(s));
}

}  // namespace halluc
