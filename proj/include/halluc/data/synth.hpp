#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "halluc/core/rng.hpp"
#include "halluc/data/dataset.hpp"

namespace halluc::data {

/// Parameters of the synthetic multimodal dataset.
struct SynthSpec {
  int num_classes = 10;
  int samples_per_class = 50;
  ImageShape image_shape{3, 32, 32};
  int embed_dim = 16;
  double noise_level = 0.1;
  std::uint64_t seed = 0;
  /// Number of binary visual attributes shared by all classes.
  int num_attributes = 6;
  /// Amplitude of each attribute pattern in the class prototype.
  double contrast = 0.5;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

/// Class-level ground truth behind a synthetic dataset.
struct SynthPrototypes {
  std::vector<std::vector<int>> codes;           // class -> attribute signs (+1/-1)
  std::vector<std::vector<float>> images;        // class -> HWC prototype image
  std::vector<std::vector<float>> embeddings;    // class -> noiseless text embedding
};

inline void validate(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (spec.samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
  if (spec.image_shape.channels <= 0 || spec.image_shape.height <= 0 || spec.image_shape.width <= 0)
    throw ConfigError("synth: image dimensions must be positive");
  if (spec.embed_dim <= 0) throw ConfigError("synth: embed_dim must be positive");
  if (!(spec.noise_level >= 0.0)) throw ConfigError("synth: noise_level must be >= 0");
  if (spec.num_attributes < 1 || spec.num_attributes > 24) throw ConfigError("synth: num_attributes must be in [1, 24]");
  if ((1LL << spec.num_attributes) < spec.num_classes)
    throw ConfigError("synth: 2^num_attributes must be >= num_classes so codes stay distinct");
  if (!(spec.contrast > 0.0)) throw ConfigError("synth: contrast must be positive");
}

/// Builds the class prototypes. Construction, all drawn from one generator
/// seeded with `spec.seed` in this order:
///
///  1. A attribute patterns. Pattern j is a coloured isotropic Gaussian blob:
///     centre uniform in the middle 60% of the frame, radius uniform in
///     [0.08, 0.16] of the width, colour uniform in [-1, 1]^C rescaled so its
///     largest channel has magnitude 1.
///  2. Class codes: num_classes distinct draws from {-1, +1}^A.
///  3. A text projection M (embed_dim x A) with N(0, 1/A) entries.
///
/// Class k then has image prototype clip(contrast * sum_j code_kj * pattern_j)
/// and text prototype M * code_k. Text and image are both linear in the same
/// attributes, so a text-to-image mapping learned on some classes carries
/// over to unseen ones.
inline SynthPrototypes synth_prototypes(const SynthSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const auto shape = spec.image_shape;
  const int attrs = spec.num_attributes;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> patterns(attrs, std::vector<double>(static_cast<std::size_t>(shape.size())));
  for (auto& pat : patterns) {
    const double cy = (0.2 + 0.6 * unit(rng)) * shape.height;
    const double cx = (0.2 + 0.6 * unit(rng)) * shape.width;
    const double radius = (0.08 + 0.08 * unit(rng)) * shape.width;
    std::vector<double> colour(shape.channels);
    double peak = 0.0;
    for (auto& c : colour) {
      c = 2.0 * unit(rng) - 1.0;
      peak = std::max(peak, std::abs(c));
    }
    for (auto& c : colour) c /= std::max(peak, 1e-6);
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x) {
        const double d2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
        const double w = std::exp(-d2 / (2.0 * radius * radius));
        for (int c = 0; c < shape.channels; ++c)
          pat[static_cast<std::size_t>((y * shape.width + x) * shape.channels + c)] = colour[c] * w;
      }
  }

  std::vector<std::int64_t> code_ids(static_cast<std::size_t>(1LL << attrs));
  std::iota(code_ids.begin(), code_ids.end(), 0);
  // Partial Fisher-Yates: only the first num_classes positions are needed.
  for (int k = 0; k < spec.num_classes; ++k) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), code_ids.size() - 1);
    std::swap(code_ids[static_cast<std::size_t>(k)], code_ids[pick(rng)]);
  }

  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(attrs)));
  std::vector<double> projection(static_cast<std::size_t>(spec.embed_dim * attrs));
  for (auto& v : projection) v = gauss(rng);

  SynthPrototypes out;
  for (int k = 0; k < spec.num_classes; ++k) {
    std::vector<int> code(attrs);
    for (int j = 0; j < attrs; ++j) code[j] = (code_ids[static_cast<std::size_t>(k)] >> j) & 1 ? 1 : -1;

    std::vector<float> img(static_cast<std::size_t>(shape.size()));
    for (std::size_t p = 0; p < img.size(); ++p) {
      double v = 0.0;
      for (int j = 0; j < attrs; ++j) v += code[j] * patterns[j][p];
      img[p] = static_cast<float>(std::clamp(spec.contrast * v, -1.0, 1.0));
    }

    std::vector<float> emb(static_cast<std::size_t>(spec.embed_dim));
    for (int i = 0; i < spec.embed_dim; ++i) {
      double v = 0.0;
      for (int j = 0; j < attrs; ++j) v += projection[static_cast<std::size_t>(i * attrs + j)] * code[j];
      emb[i] = static_cast<float>(v);
    }

    out.codes.push_back(std::move(code));
    out.images.push_back(std::move(img));
    out.embeddings.push_back(std::move(emb));
  }
  return out;
}

/// Synthesizes `samples_per_class` samples for each of `num_classes` classes
/// (labels 0..num_classes-1, grouped by class). Each sample is its class
/// prototype plus N(0, noise_level^2) pixel noise (clipped to [-1, 1]) and
/// N(0, noise_level^2) embedding noise. Pure function of `spec`.
inline Dataset synth_dataset(const SynthSpec& spec) {
  const auto protos = synth_prototypes(spec);
  Rng rng(derive_seed(spec.seed, 1));
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = spec.noise_level;

  Dataset ds(spec.image_shape, spec.embed_dim);
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s;
      s.label = static_cast<ClassId>(k);
      s.image = protos.images[k];
      for (auto& v : s.image) v = static_cast<float>(std::clamp(v + sigma * noise(rng), -1.0, 1.0));
      s.text_embedding = protos.embeddings[k];
      for (auto& v : s.text_embedding) v = static_cast<float>(v + sigma * noise(rng));
      ds.add(std::move(s));
    }
  }
  return ds;
}

}  // namespace halluc::data
