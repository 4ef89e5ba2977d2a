#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "halluc/core/rng.hpp"
#include "halluc/data/episode.hpp"
#include "halluc/tcgan/losses.hpp"
#include "halluc/tcgan/networks.hpp"

namespace halluc::selection {

using data::ClassId;

enum class ScoringRule {
  class_only,     // combined = class posterior
  realism_gated,  // combined = realism * class posterior
};

inline std::string to_string(ScoringRule r) { return r == ScoringRule::class_only ? "class-only" : "realism-gated"; }

inline ScoringRule scoring_rule_from_string(const std::string& s) {
  if (s == "class-only") return ScoringRule::class_only;
  if (s == "realism-gated") return ScoringRule::realism_gated;
  throw ConfigError("unknown scoring rule '" + s + "' (expected class-only or realism-gated)");
}

struct Scores {
  double realism = 0;          // sigmoid(realism logit)
  double class_posterior = 0;  // softmax(class logits)[intended]
  double combined = 0;
};

struct Candidate {
  std::vector<float> image;  // H x W x C
  std::vector<float> text_embedding;
  ClassId intended_class = 0;
  std::size_t source_embedding_index = 0;  // index into the episode support
  std::uint64_t z_seed = 0;
  double realism_score = 0;
  double class_posterior = 0;
  double combined_score = 0;
  std::size_t generation_index = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct CandidatePool {
  std::map<ClassId, std::vector<Candidate>> per_class;
  int pool_size = 0;
  ScoringRule rule = ScoringRule::class_only;

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

/// Scores from raw discriminator outputs. `class_logits` is one column.
template <class Derived>
Scores score_from_logits(double realism_logit, const Eigen::MatrixBase<Derived>& class_logits, int intended_head,
                         ScoringRule rule) {
  const auto k = class_logits.size();
  if (intended_head < 0 || intended_head >= k)
    throw DimensionError("score: intended class index " + std::to_string(intended_head) + " outside class head of width " +
                         std::to_string(k));
  Eigen::VectorXd z = class_logits.template cast<double>();
  const double mx = z.maxCoeff();
  const double denom = (z.array() - mx).exp().sum();
  Scores s;
  s.realism = tcgan::sigmoid(realism_logit);
  s.class_posterior = std::exp(z(intended_head) - mx) / denom;
  s.combined = rule == ScoringRule::class_only ? s.class_posterior : s.realism * s.class_posterior;
  return s;
}

/// One D* pass over a single image/embedding pair.
template <class S>
Scores score_candidate(const tcgan::GanModel<S>& model, const std::vector<float>& image,
                       const std::vector<float>& text_embedding, ClassId intended_class, ScoringRule rule) {
  const int head = model.head_index(intended_class);
  if (head < 0) throw DimensionError("score_candidate: class " + std::to_string(intended_class) + " not in class head");
  const auto out = model.d.apply(data::images_to_spatial<S>({&image}, model.arch.image),
                                 data::embeddings_to_features<S>({&text_embedding}, model.arch.embed_dim));
  return score_from_logits(static_cast<double>(out.realism(0, 0)), out.class_logits.col(0), head, rule);
}

/// Scores `cands` in place, in batches of `batch` through D*.
template <class S>
void score_candidates(const tcgan::GanModel<S>& model, std::vector<Candidate>& cands, ScoringRule rule,
                      std::size_t batch = 64) {
  for (std::size_t start = 0; start < cands.size(); start += batch) {
    const std::size_t end = std::min(cands.size(), start + batch);
    std::vector<const std::vector<float>*> imgs, txts;
    for (std::size_t i = start; i < end; ++i) {
      imgs.push_back(&cands[i].image);
      txts.push_back(&cands[i].text_embedding);
    }
    const auto out = model.d.apply(data::images_to_spatial<S>(imgs, model.arch.image),
                                   data::embeddings_to_features<S>(txts, model.arch.embed_dim));
    for (std::size_t i = start; i < end; ++i) {
      const int head = model.head_index(cands[i].intended_class);
      if (head < 0) throw DimensionError("score: class " + std::to_string(cands[i].intended_class) + " not in class head");
      const auto col = static_cast<Eigen::Index>(i - start);
      const auto s = score_from_logits(static_cast<double>(out.realism(0, col)), out.class_logits.col(col), head, rule);
      cands[i].realism_score = s.realism;
      cands[i].class_posterior = s.class_posterior;
      cands[i].combined_score = s.combined;
    }
  }
}

/// Noise vector for a candidate; a pure function of its z_seed.
inline std::vector<float> candidate_noise(std::uint64_t z_seed, int dim) {
  Rng rng(z_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> z(static_cast<std::size_t>(dim));
  for (auto& v : z) v = static_cast<float>(gauss(rng));
  return z;
}

/// Generates and scores N candidates per novel class. Candidate i of class c
/// conditions on a support embedding of c drawn uniformly with replacement
/// and on noise seeded by z_seed = derive_seed(derive_seed(seed, c), i).
template <class S>
CandidatePool build_pool(const tcgan::GanModel<S>& model, const data::Episode& episode, int pool_size,
                         std::uint64_t seed, ScoringRule rule = ScoringRule::class_only) {
  if (pool_size < 1) throw ConfigError("build_pool: pool size must be >= 1");
  if (episode.support.empty()) throw DataError("build_pool: episode support is empty");

  CandidatePool pool;
  pool.pool_size = pool_size;
  pool.rule = rule;
  for (ClassId c : episode.novel_classes) {
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < episode.support.size(); ++i)
      if (episode.support[i].label == c) sources.push_back(i);
    if (sources.empty()) throw DataError("build_pool: no support sample for class " + std::to_string(c));

    const std::uint64_t class_seed = derive_seed(seed, c);
    Rng pick_rng(class_seed);
    std::uniform_int_distribution<std::size_t> pick(0, sources.size() - 1);
    std::vector<Candidate> cands(static_cast<std::size_t>(pool_size));
    for (std::size_t i = 0; i < cands.size(); ++i) {
      auto& cand = cands[i];
      cand.intended_class = c;
      cand.generation_index = i;
      cand.source_embedding_index = sources[pick(pick_rng)];
      cand.text_embedding = episode.support[cand.source_embedding_index].text_embedding;
      cand.z_seed = derive_seed(class_seed, i);
    }

    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < cands.size(); start += kBatch) {
      const std::size_t end = std::min(cands.size(), start + kBatch);
      const auto n = static_cast<Eigen::Index>(end - start);
      nn::Matrix<S> text(model.arch.embed_dim, n), noise(model.arch.noise_dim, n);
      for (std::size_t i = start; i < end; ++i) {
        const auto col = static_cast<Eigen::Index>(i - start);
        const auto z = candidate_noise(cands[i].z_seed, model.arch.noise_dim);
        if (static_cast<int>(cands[i].text_embedding.size()) != model.arch.embed_dim)
          throw DimensionError("build_pool: support embedding dimension differs from the model");
        for (int r = 0; r < model.arch.embed_dim; ++r) text(r, col) = static_cast<S>(cands[i].text_embedding[r]);
        for (int r = 0; r < model.arch.noise_dim; ++r) noise(r, col) = static_cast<S>(z[r]);
      }
      const auto images = model.g.apply(text, noise);
      for (std::size_t i = start; i < end; ++i)
        cands[i].image = data::spatial_to_image<S>(images, model.arch.image, static_cast<Eigen::Index>(i - start));
    }
    score_candidates(model, cands, rule);
    pool.per_class.emplace(c, std::move(cands));
  }
  return pool;
}

/// Orders candidates by descending combined score; equal scores keep
/// ascending generation_index.
inline void sort_by_score(std::vector<Candidate>& cands) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.combined_score != b.combined_score) return a.combined_score > b.combined_score;
    return a.generation_index < b.generation_index;
  });
}

/// Per class, the m highest-scoring candidates in non-increasing score order.
/// m = 0 yields empty lists (the real-only baseline).
inline std::map<ClassId, std::vector<Candidate>> select_top_m(const CandidatePool& pool, int m) {
  if (m < 0) throw ConfigError("select_top_m: m must be >= 0");
  std::map<ClassId, std::vector<Candidate>> out;
  for (const auto& [c, cands] : pool.per_class) {
    if (static_cast<std::size_t>(m) > cands.size())
      throw ConfigError("select_top_m: class " + std::to_string(c) + " has " + std::to_string(cands.size()) +
                        " candidates, cannot select m=" + std::to_string(m));
    auto sorted = cands;
    sort_by_score(sorted);
    sorted.resize(static_cast<std::size_t>(m));
    out.emplace(c, std::move(sorted));
  }
  return out;
}

enum class Provenance { real, hallucinated };

struct AugmentedDataset {
  data::ImageShape image_shape{};
  std::vector<data::Sample> real;
  std::vector<data::Sample> hallucinated;

  std::size_t size() const { return real.size() + hallucinated.size(); }

  /// Concatenated samples (real first) with a provenance flag each.
  std::vector<std::pair<const data::Sample*, Provenance>> all() const {
    std::vector<std::pair<const data::Sample*, Provenance>> out;
    out.reserve(size());
    for (const auto& s : real) out.emplace_back(&s, Provenance::real);
    for (const auto& s : hallucinated) out.emplace_back(&s, Provenance::hallucinated);
    return out;
  }
};

/// Real support plus selected candidates relabelled with their intended class.
inline AugmentedDataset build_augmented(const data::Episode& episode,
                                        const std::map<ClassId, std::vector<Candidate>>& selected) {
  std::vector<ClassId> keys;
  for (const auto& [c, _] : selected) keys.push_back(c);
  if (keys != episode.novel_classes)
    throw DataError("build_augmented: selected classes do not match the episode's novel classes");

  AugmentedDataset out;
  out.image_shape = episode.image_shape;
  out.real = episode.support;
  for (const auto& [c, cands] : selected) {
    for (const auto& cand : cands) {
      if (cand.intended_class != c) throw DataError("build_augmented: candidate filed under the wrong class");
      out.hallucinated.push_back({cand.image, cand.text_embedding, c});
    }
  }
  return out;
}

}  // namespace halluc::selection
