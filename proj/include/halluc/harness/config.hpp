#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "halluc/classifier/classifier.hpp"
#include "halluc/core/io.hpp"
#include "halluc/data/synth.hpp"
#include "halluc/selection/selection.hpp"
#include "halluc/tcgan/trainer.hpp"

namespace halluc::harness {

using io::json;

inline const std::vector<std::string> kKnownArms{"real-only", "augmented"};

struct SelectionParams {
  int pool_size = 256;  // N candidates per novel class
  int m = 30;           // selected per class in the augmented arm
  std::vector<int> m_sweep;  // extra augmented cells, one per m
  selection::ScoringRule rule = selection::ScoringRule::class_only;

  friend bool operator==(const SelectionParams&, const SelectionParams&) = default;
};

/// Everything a run depends on. The data seed, split seed, GAN seed and
/// classifier seed are not stored here: each master seed in `seeds` expands
/// into them (see experiment.hpp).
struct ExperimentConfig {
  data::SynthSpec data;
  std::string dataset_path;  // when set, the dataset is loaded instead of synthesized
  double base_fraction = 0.8;
  int query_per_class = 20;
  tcgan::GanHyper gan;
  SelectionParams selection;
  classifier::ClsHyper classifier;
  std::vector<int> n_shots{1, 2, 5, 10};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::string> arms{"real-only", "augmented"};
  std::string output_dir = "runs/default";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace detail

inline json synth_to_json(const data::SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"samples_per_class", s.samples_per_class},
          {"image_shape", {s.image_shape.height, s.image_shape.width, s.image_shape.channels}},
          {"embed_dim", s.embed_dim},
          {"noise_level", s.noise_level},
          {"num_attributes", s.num_attributes},
          {"contrast", s.contrast}};
}

inline data::SynthSpec synth_from_json(const json& j) {
  const std::string w = "data";
  detail::check_keys(j, {"num_classes", "samples_per_class", "image_shape", "embed_dim", "noise_level", "num_attributes",
                         "contrast"},
                     w);
  data::SynthSpec s;
  detail::read_opt(j, "num_classes", s.num_classes, w);
  detail::read_opt(j, "samples_per_class", s.samples_per_class, w);
  if (j.contains("image_shape")) {
    std::vector<int> hwc;
    detail::read_opt(j, "image_shape", hwc, w);
    if (hwc.size() != 3) throw ConfigError("data.image_shape: expected [H, W, C]");
    s.image_shape = {hwc[2], hwc[0], hwc[1]};
  }
  detail::read_opt(j, "embed_dim", s.embed_dim, w);
  detail::read_opt(j, "noise_level", s.noise_level, w);
  detail::read_opt(j, "num_attributes", s.num_attributes, w);
  detail::read_opt(j, "contrast", s.contrast, w);
  return s;
}

inline json gan_to_json(const tcgan::GanHyper& h) {
  return {{"noise_dim", h.noise_dim},
          {"lr_g", h.lr_g},
          {"lr_d", h.lr_d},
          {"beta1", h.beta1},
          {"beta2", h.beta2},
          {"batch_size", h.batch_size},
          {"steps_pretrain", h.steps_pretrain},
          {"steps_finetune", h.steps_finetune},
          {"class_weight", h.class_weight},
          {"class_objective", h.class_objective == tcgan::ClassObjective::log_likelihood ? "log-likelihood" : "probability"},
          {"g_channels", h.widths.g_channels},
          {"d_channels", h.widths.d_channels},
          {"text_proj", h.widths.text_proj},
          {"joint_channels", h.widths.joint_channels}};
}

inline tcgan::GanHyper gan_from_json(const json& j) {
  const std::string w = "gan";
  detail::check_keys(j, {"noise_dim", "lr_g", "lr_d", "beta1", "beta2", "batch_size", "steps_pretrain", "steps_finetune",
                         "class_weight", "class_objective", "g_channels", "d_channels", "text_proj", "joint_channels"},
                     w);
  tcgan::GanHyper h;
  detail::read_opt(j, "noise_dim", h.noise_dim, w);
  detail::read_opt(j, "lr_g", h.lr_g, w);
  detail::read_opt(j, "lr_d", h.lr_d, w);
  detail::read_opt(j, "beta1", h.beta1, w);
  detail::read_opt(j, "beta2", h.beta2, w);
  detail::read_opt(j, "batch_size", h.batch_size, w);
  detail::read_opt(j, "steps_pretrain", h.steps_pretrain, w);
  detail::read_opt(j, "steps_finetune", h.steps_finetune, w);
  detail::read_opt(j, "class_weight", h.class_weight, w);
  if (j.contains("class_objective")) {
    std::string o;
    detail::read_opt(j, "class_objective", o, w);
    if (o == "log-likelihood")
      h.class_objective = tcgan::ClassObjective::log_likelihood;
    else if (o == "probability")
      h.class_objective = tcgan::ClassObjective::probability;
    else
      throw ConfigError("gan.class_objective: expected log-likelihood or probability");
  }
  detail::read_opt(j, "g_channels", h.widths.g_channels, w);
  detail::read_opt(j, "d_channels", h.widths.d_channels, w);
  detail::read_opt(j, "text_proj", h.widths.text_proj, w);
  detail::read_opt(j, "joint_channels", h.widths.joint_channels, w);
  return h;
}

inline json classifier_to_json(const classifier::ClsHyper& h) {
  return {{"lr", h.lr},
          {"steps", h.steps},
          {"batch_size", h.batch_size},
          {"hallucinated_weight", h.hallucinated_weight},
          {"channels", h.channels}};
}

inline classifier::ClsHyper classifier_from_json(const json& j) {
  const std::string w = "classifier";
  detail::check_keys(j, {"lr", "steps", "batch_size", "hallucinated_weight", "channels"}, w);
  classifier::ClsHyper h;
  detail::read_opt(j, "lr", h.lr, w);
  detail::read_opt(j, "steps", h.steps, w);
  detail::read_opt(j, "batch_size", h.batch_size, w);
  detail::read_opt(j, "hallucinated_weight", h.hallucinated_weight, w);
  detail::read_opt(j, "channels", h.channels, w);
  return h;
}

inline json to_json(const ExperimentConfig& c) {
  return {{"data", synth_to_json(c.data)},
          {"dataset_path", c.dataset_path},
          {"base_fraction", c.base_fraction},
          {"query_per_class", c.query_per_class},
          {"gan", gan_to_json(c.gan)},
          {"selection",
           {{"pool_size", c.selection.pool_size},
            {"m", c.selection.m},
            {"m_sweep", c.selection.m_sweep},
            {"scoring_rule", selection::to_string(c.selection.rule)}}},
          {"classifier", classifier_to_json(c.classifier)},
          {"n_shots", c.n_shots},
          {"seeds", c.seeds},
          {"arms", c.arms},
          {"output_dir", c.output_dir}};
}

/// Checks every field against the preconditions of the stage that uses it.
inline void validate(const ExperimentConfig& c) {
  if (c.dataset_path.empty()) data::validate(c.data);
  if (!(c.base_fraction > 0.0 && c.base_fraction < 1.0)) throw ConfigError("base_fraction must be in (0, 1)");
  if (c.query_per_class < 1) throw ConfigError("query_per_class must be >= 1");
  c.gan.validate();
  c.classifier.validate();
  if (c.selection.pool_size < 1) throw ConfigError("selection.pool_size must be >= 1");
  if (c.selection.m < 0 || c.selection.m > c.selection.pool_size)
    throw ConfigError("selection.m must be in [0, pool_size]");
  for (int m : c.selection.m_sweep)
    if (m < 0 || m > c.selection.pool_size) throw ConfigError("selection.m_sweep entries must be in [0, pool_size]");
  if (c.n_shots.empty()) throw ConfigError("n_shots must be non-empty");
  for (int n : c.n_shots)
    if (n < 1) throw ConfigError("n_shots entries must be >= 1");
  if (std::set<int>(c.n_shots.begin(), c.n_shots.end()).size() != c.n_shots.size())
    throw ConfigError("n_shots contains duplicates");
  if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    throw ConfigError("seeds contains duplicates");
  if (c.arms.empty()) throw ConfigError("arms must be non-empty");
  for (const auto& a : c.arms)
    if (std::find(kKnownArms.begin(), kKnownArms.end(), a) == kKnownArms.end())
      throw ConfigError("unknown arm '" + a + "' (expected real-only or augmented)");
  if (c.dataset_path.empty() && c.data.samples_per_class < *std::max_element(c.n_shots.begin(), c.n_shots.end()) +
                                                               c.query_per_class)
    throw ConfigError("data.samples_per_class is smaller than the largest n_shot plus query_per_class");
}

/// Parses a config; absent keys keep their defaults, unknown keys are errors.
inline ExperimentConfig config_from_json(const json& j) {
  const std::string w = "config";
  detail::check_keys(j, {"data", "dataset_path", "base_fraction", "query_per_class", "gan", "selection", "classifier",
                         "n_shots", "seeds", "arms", "output_dir"},
                     w);
  ExperimentConfig c;
  if (j.contains("data")) c.data = synth_from_json(j.at("data"));
  if (j.contains("dataset_path") && !j.at("dataset_path").is_null()) detail::read_opt(j, "dataset_path", c.dataset_path, w);
  detail::read_opt(j, "base_fraction", c.base_fraction, w);
  detail::read_opt(j, "query_per_class", c.query_per_class, w);
  if (j.contains("gan")) c.gan = gan_from_json(j.at("gan"));
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    detail::check_keys(s, {"pool_size", "m", "m_sweep", "scoring_rule"}, "selection");
    detail::read_opt(s, "pool_size", c.selection.pool_size, "selection");
    detail::read_opt(s, "m", c.selection.m, "selection");
    detail::read_opt(s, "m_sweep", c.selection.m_sweep, "selection");
    if (s.contains("scoring_rule")) {
      std::string r;
      detail::read_opt(s, "scoring_rule", r, "selection");
      c.selection.rule = selection::scoring_rule_from_string(r);
    }
  }
  if (j.contains("classifier")) c.classifier = classifier_from_json(j.at("classifier"));
  detail::read_opt(j, "n_shots", c.n_shots, w);
  detail::read_opt(j, "seeds", c.seeds, w);
  detail::read_opt(j, "arms", c.arms, w);
  detail::read_opt(j, "output_dir", c.output_dir, w);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const io::fs::path& path) {
  try {
    return config_from_json(io::read_json(path));
  } catch (const FormatError& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

/// Hash of every field that affects results. output_dir is excluded so a
/// moved run directory keeps its identity.
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  return io::hex64(io::fnv1a(j.dump()));
}

}  // namespace halluc::harness
