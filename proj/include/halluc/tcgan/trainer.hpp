#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "halluc/core/rng.hpp"
#include "halluc/data/episode.hpp"
#include "halluc/nn/adam.hpp"
#include "halluc/tcgan/objective.hpp"

namespace halluc::tcgan {

struct GanHyper {
  int noise_dim = 16;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 64;
  int steps_pretrain = 3000;
  int steps_finetune = 500;
  double class_weight = 1.0;
  ClassObjective class_objective = ClassObjective::log_likelihood;
  std::uint64_t seed = 0;
  ArchWidths widths;

  void validate() const {
    if (noise_dim <= 0) throw ConfigError("GanHyper: noise_dim must be positive");
    if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("GanHyper: learning rates must be positive");
    if (batch_size <= 0) throw ConfigError("GanHyper: batch_size must be positive");
    if (steps_pretrain < 0 || steps_finetune < 0) throw ConfigError("GanHyper: step budgets must be >= 0");
    if (!(class_weight >= 0.0)) throw ConfigError("GanHyper: class_weight must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("GanHyper: Adam betas must be in [0, 1)");
  }

  friend bool operator==(const GanHyper&, const GanHyper&) = default;
};

inline GanArch make_arch(const data::Dataset& ds, const GanHyper& hyper, int num_classes) {
  GanArch a;
  a.image = ds.image_shape();
  a.embed_dim = ds.embed_dim();
  a.noise_dim = hyper.noise_dim;
  a.num_classes = num_classes;
  a.widths = hyper.widths;
  a.validate();
  return a;
}

/// Per-step loss curves of an alternating run.
struct TrainTrace {
  std::vector<double> loss_d, adv_d, cls_d;
  std::vector<double> loss_g, adv_g, cls_g;

  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

/// Pool of conditioning samples the trainer draws minibatches from.
struct TrainingPool {
  std::vector<const data::Sample*> samples;
  std::vector<int> head_labels;  // parallel to samples
};

/// Builds a network batch from pool entries.
template <class S>
Batch<S> make_batch(const TrainingPool& pool, std::span<const std::size_t> picks, const data::ImageShape& shape,
                    int embed_dim) {
  std::vector<const std::vector<float>*> imgs, txts;
  Batch<S> b;
  for (auto i : picks) {
    imgs.push_back(&pool.samples[i]->image);
    txts.push_back(&pool.samples[i]->text_embedding);
    b.labels.push_back(pool.head_labels[i]);
  }
  b.images = data::images_to_spatial<S>(imgs, shape);
  b.text = data::embeddings_to_features<S>(txts, embed_dim);
  return b;
}

/// One-D-step-then-one-G-step training over a fixed pool. The D half-step
/// reads G (to draw fakes) but only steps D's optimizer; the G half-step
/// only steps G's.
template <class S>
class AlternatingTrainer {
 public:
  AlternatingTrainer(GanModel<S>& model, TrainingPool pool, const GanHyper& hyper, S lambda, std::uint64_t seed)
      : model_(model),
        pool_(std::move(pool)),
        hyper_(hyper),
        lambda_(lambda),
        rng_(seed),
        opt_d_(model.d.params(), {hyper.lr_d, hyper.beta1, hyper.beta2, 1e-8}),
        opt_g_(model.g.params(), {hyper.lr_g, hyper.beta1, hyper.beta2, 1e-8}) {
    if (pool_.samples.empty()) throw DataError("trainer: empty training pool");
  }

  /// Draws the conditioning batch and noise for the next half-step.
  Batch<S> draw_batch() {
    std::uniform_int_distribution<std::size_t> pick(0, pool_.samples.size() - 1);
    std::vector<std::size_t> idx(static_cast<std::size_t>(hyper_.batch_size));
    for (auto& i : idx) i = pick(rng_);
    return make_batch<S>(pool_, idx, model_.arch.image, model_.arch.embed_dim);
  }

  Matrix<S> draw_noise(Eigen::Index n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix<S> z(model_.arch.noise_dim, n);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<S>(gauss(rng_));
    return z;
  }

  LossParts<S> d_half_step(const Batch<S>& batch, const Matrix<S>& noise) {
    const Matrix<S> fakes = model_.g.apply(batch.text, noise);
    opt_d_.zero_grad();
    auto parts = loss_D_backward(model_.d, batch, fakes, batch.text, lambda_, hyper_.class_objective);
    opt_d_.step();
    return parts;
  }

  LossParts<S> g_half_step(const Batch<S>& batch, const Matrix<S>& noise) {
    opt_g_.zero_grad();
    opt_d_.zero_grad();
    auto parts = loss_G_backward(model_.g, model_.d, batch.text, noise, batch.labels, lambda_, hyper_.class_objective);
    opt_d_.zero_grad();
    opt_g_.step();
    return parts;
  }

  void run(int steps, TrainTrace* trace, const char* phase) {
    for (int t = 0; t < steps; ++t) {
      const auto batch = draw_batch();
      LossParts<S> ld, lg;
      try {
        ld = d_half_step(batch, draw_noise(batch.size()));
        lg = g_half_step(batch, draw_noise(batch.size()));
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(phase) + ": loss diverged at step " + std::to_string(t) + " (" + e.what() + ")");
      }
      if (!std::isfinite(static_cast<double>(ld.total)) || !std::isfinite(static_cast<double>(lg.total))) {
        std::ostringstream msg;
        msg << phase << ": loss diverged at step " << t << " (loss_D=" << ld.total << ", loss_G=" << lg.total << ")";
        throw NumericalError(msg.str());
      }
      if (trace) {
        trace->loss_d.push_back(ld.total);
        trace->adv_d.push_back(ld.adversarial);
        trace->cls_d.push_back(ld.classification);
        trace->loss_g.push_back(lg.total);
        trace->adv_g.push_back(lg.adversarial);
        trace->cls_g.push_back(lg.classification);
      }
    }
  }

 private:
  GanModel<S>& model_;
  TrainingPool pool_;
  GanHyper hyper_;
  S lambda_;
  Rng rng_;
  nn::Adam<S> opt_d_, opt_g_;
};

// Seed layout under GanHyper::seed: stream 0 initializes the model, 1 drives
// pretraining, 2 re-initializes the class head, 3 drives finetuning.

/// Adversarial-only (lambda = 0) training on base-class samples.
template <class S = float>
GanModel<S> pretrain_base(const data::Dataset& dataset, const data::SplitConfig& split, const GanHyper& hyper,
                          TrainTrace* trace = nullptr) {
  hyper.validate();
  if (split.base_classes.empty()) throw DataError("pretrain_base: no base classes");
  std::vector<data::ClassId> base(split.base_classes.begin(), split.base_classes.end());

  TrainingPool pool;
  for (const auto& s : dataset.samples()) {
    if (!split.base_classes.contains(s.label)) continue;
    pool.samples.push_back(&s);
    pool.head_labels.push_back(static_cast<int>(std::lower_bound(base.begin(), base.end(), s.label) - base.begin()));
  }
  if (pool.samples.empty()) throw DataError("pretrain_base: dataset holds no base-class samples");

  auto model = init_model<S>(make_arch(dataset, hyper, static_cast<int>(base.size())), base, derive_seed(hyper.seed, 0));
  {
    AlternatingTrainer<S> trainer(model, std::move(pool), hyper, S(0), derive_seed(hyper.seed, 1));
    trainer.run(hyper.steps_pretrain, trace, "pretrain_base");
  }
  model.phase = "pretrained";
  return model;
}

/// Compound-loss training on the episode support. The trunk and generator
/// are warm-started; the class head is re-initialized over the novel classes.
template <class S = float>
GanModel<S> finetune_novel(const GanModel<S>& pretrained, const data::Episode& episode, const GanHyper& hyper,
                           TrainTrace* trace = nullptr) {
  hyper.validate();
  if (episode.support.empty()) throw DataError("finetune_novel: episode support is empty");
  if (hyper.noise_dim != pretrained.arch.noise_dim)
    throw ConfigError("finetune_novel: noise_dim differs from the pretrained model");

  GanModel<S> model = pretrained;
  if (hyper.steps_finetune == 0) return model;

  model.class_ids = episode.novel_classes;
  Rng head_rng(derive_seed(hyper.seed, 2));
  model.d.reset_class_head(static_cast<int>(model.class_ids.size()), head_rng);
  model.arch.num_classes = static_cast<int>(model.class_ids.size());

  TrainingPool pool;
  for (const auto& s : episode.support) {
    const int h = model.head_index(s.label);
    if (h < 0) throw DataError("finetune_novel: support label " + std::to_string(s.label) + " is not a novel class");
    pool.samples.push_back(&s);
    pool.head_labels.push_back(h);
  }
  {
    AlternatingTrainer<S> trainer(model, std::move(pool), hyper, static_cast<S>(hyper.class_weight),
                                  derive_seed(hyper.seed, 3));
    trainer.run(hyper.steps_finetune, trace, "finetune_novel");
  }
  model.phase = "finetuned";
  return model;
}

/// G(T, z) for one embedding and noise vector; returns an H x W x C image.
template <class S>
std::vector<float> generate(const GanModel<S>& model, std::span<const float> text_embedding, std::span<const float> z) {
  if (static_cast<int>(text_embedding.size()) != model.arch.embed_dim)
    throw DimensionError("generate: text embedding has " + std::to_string(text_embedding.size()) + " entries, model expects " +
                         std::to_string(model.arch.embed_dim));
  if (static_cast<int>(z.size()) != model.arch.noise_dim)
    throw DimensionError("generate: noise has " + std::to_string(z.size()) + " entries, model expects " +
                         std::to_string(model.arch.noise_dim));
  Matrix<S> t(model.arch.embed_dim, 1), n(model.arch.noise_dim, 1);
  for (int i = 0; i < model.arch.embed_dim; ++i) t(i, 0) = static_cast<S>(text_embedding[i]);
  for (int i = 0; i < model.arch.noise_dim; ++i) n(i, 0) = static_cast<S>(z[i]);
  return data::spatial_to_image<S>(model.g.apply(t, n), model.arch.image, 0);
}

/// Accuracy of D's class head on labelled samples (argmax, ties to lowest index).
template <class S>
double class_head_accuracy(const GanModel<S>& model, const std::vector<data::Sample>& samples) {
  if (samples.empty()) return 0.0;
  std::vector<const std::vector<float>*> imgs, txts;
  for (const auto& s : samples) {
    imgs.push_back(&s.image);
    txts.push_back(&s.text_embedding);
  }
  const auto out = model.d.apply(data::images_to_spatial<S>(imgs, model.arch.image),
                                 data::embeddings_to_features<S>(txts, model.arch.embed_dim));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto arg = nn::argmax_column<S>(out.class_logits, static_cast<Eigen::Index>(i));
    if (model.head_index(samples[i].label) == arg) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace halluc::tcgan
