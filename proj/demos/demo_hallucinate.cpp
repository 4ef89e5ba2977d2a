// One few-shot episode end to end at a small scale: pretrain the
// text-conditional GAN on base classes, finetune on a 1-shot support set,
// hallucinate and select candidates, then compare a classifier trained on
// the real support alone against one trained on the augmented set.

#include <cstdio>

#include "halluc/halluc.hpp"

using namespace halluc;

int main() {
  data::SynthSpec spec;
  spec.num_classes = 6;
  spec.samples_per_class = 30;
  spec.image_shape = {3, 16, 16};
  spec.noise_level = 0.1;
  spec.seed = 1;
  const auto ds = data::synth_dataset(spec);
  const auto split = data::make_split(ds, 0.67, 2);
  const auto episode = data::sample_episode(ds, split, 1, 20, 3);

  tcgan::GanHyper gan;
  gan.batch_size = 32;
  gan.steps_pretrain = 400;
  gan.steps_finetune = 200;
  gan.widths.g_channels = {16, 8};
  gan.widths.d_channels = {8, 16};
  gan.seed = 4;
  std::puts("pretraining on base classes...");
  const auto base = tcgan::pretrain_base<float>(ds, split, gan);
  std::puts("finetuning on the 1-shot support...");
  const auto star = tcgan::finetune_novel<float>(base, episode, gan);

  const auto pool = selection::build_pool(star, episode, 64, 5);
  const auto picked = selection::select_top_m(pool, 16);
  for (const auto& [c, v] : picked)
    std::printf("class %u: best score %.3f, 16th score %.3f\n", c, v.front().combined_score, v.back().combined_score);

  classifier::ClsHyper cls;
  cls.steps = 200;
  cls.seed = 6;
  const auto real = selection::build_augmented(episode, selection::select_top_m(pool, 0));
  const auto aug = selection::build_augmented(episode, picked);
  const double a0 =
      classifier::evaluate(classifier::train_classifier<float>(real, cls, episode.novel_classes), episode.query).top1_accuracy;
  const double a1 =
      classifier::evaluate(classifier::train_classifier<float>(aug, cls, episode.novel_classes), episode.query).top1_accuracy;
  std::printf("query top-1: real-only %.3f, augmented %.3f\n", a0, a1);
}
