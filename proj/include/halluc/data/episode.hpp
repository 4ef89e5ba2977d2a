#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "halluc/core/rng.hpp"
#include "halluc/data/dataset.hpp"

namespace halluc::data {

struct SplitConfig {
  std::set<ClassId> base_classes;
  std::set<ClassId> novel_classes;
  std::uint64_t seed = 0;

  friend bool operator==(const SplitConfig&, const SplitConfig&) = default;
};

/// Partitions the dataset's classes into base and novel sets. The base side
/// receives round(base_fraction * K) classes, clamped to [1, K-1]; membership
/// is decided by a seeded shuffle of the sorted class list.
inline SplitConfig make_split(const Dataset& dataset, double base_fraction, std::uint64_t seed) {
  const auto classes = dataset.classes();
  const auto k = static_cast<long>(classes.size());
  if (k < 2) throw DataError("make_split: dataset needs at least 2 classes, has " + std::to_string(k));
  if (!(base_fraction > 0.0 && base_fraction < 1.0)) throw ConfigError("make_split: base_fraction must be in (0, 1)");

  const long n_base = std::clamp(std::lround(base_fraction * static_cast<double>(k)), 1L, k - 1);
  auto order = classes;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitConfig split;
  split.seed = seed;
  split.base_classes.insert(order.begin(), order.begin() + n_base);
  split.novel_classes.insert(order.begin() + n_base, order.end());
  return split;
}

struct Episode {
  int n_shot = 0;
  ImageShape image_shape{};
  std::vector<ClassId> novel_classes;  // ascending
  std::vector<std::size_t> support_ids;  // dataset indices
  std::vector<std::size_t> query_ids;
  std::vector<Sample> support;
  std::vector<Sample> query;

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Materializes an episode from stored dataset indices (used when loading
/// episode files).
inline Episode materialize_episode(const Dataset& dataset, int n_shot, std::vector<ClassId> novel,
                                   std::vector<std::size_t> support_ids, std::vector<std::size_t> query_ids) {
  Episode ep;
  ep.n_shot = n_shot;
  ep.image_shape = dataset.image_shape();
  ep.novel_classes = std::move(novel);
  std::sort(ep.novel_classes.begin(), ep.novel_classes.end());
  ep.support_ids = std::move(support_ids);
  ep.query_ids = std::move(query_ids);
  for (auto i : ep.support_ids) {
    if (i >= dataset.size()) throw DataError("episode: support index out of range");
    ep.support.push_back(dataset[i]);
  }
  for (auto i : ep.query_ids) {
    if (i >= dataset.size()) throw DataError("episode: query index out of range");
    ep.query.push_back(dataset[i]);
  }
  return ep;
}

/// Draws n_shot support and query_per_class query samples per novel class,
/// uniformly without replacement. Classes are visited in ascending order.
inline Episode sample_episode(const Dataset& dataset, const SplitConfig& split, int n_shot, int query_per_class,
                              std::uint64_t seed) {
  if (n_shot < 1) throw ConfigError("sample_episode: n_shot must be positive");
  if (query_per_class < 1) throw ConfigError("sample_episode: query_per_class must be positive");
  if (split.novel_classes.empty()) throw ConfigError("sample_episode: split has no novel classes");

  Rng rng(seed);
  std::vector<std::size_t> support, query;
  for (ClassId c : split.novel_classes) {
    auto idx = dataset.indices_of(c);
    const auto need = static_cast<std::size_t>(n_shot + query_per_class);
    if (idx.size() < need)
      throw DataError("sample_episode: novel class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                      " samples, needs " + std::to_string(need));
    std::shuffle(idx.begin(), idx.end(), rng);
    support.insert(support.end(), idx.begin(), idx.begin() + n_shot);
    query.insert(query.end(), idx.begin() + n_shot, idx.begin() + static_cast<long>(need));
  }
  return materialize_episode(dataset, n_shot, {split.novel_classes.begin(), split.novel_classes.end()},
                             std::move(support), std::move(query));
}

}  // namespace halluc::data
