#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "halluc/classifier/classifier.hpp"
#include "halluc/data/dataset_io.hpp"
#include "halluc/data/synth.hpp"
#include "halluc/harness/config.hpp"
#include "halluc/harness/pool_io.hpp"
#include "halluc/selection/selection.hpp"
#include "halluc/tcgan/checkpoint.hpp"
#include "halluc/tcgan/trainer.hpp"

namespace halluc::harness {

inline constexpr const char* kRecordFormatVersion = "1";

struct CellKey {
  std::string arm;
  std::uint64_t seed = 0;
  int n_shot = 0;
  int m = 0;

  std::string id() const {
    return arm + "_s" + std::to_string(seed) + "_n" + std::to_string(n_shot) + "_m" + std::to_string(m);
  }
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellResult {
  CellKey key;
  std::optional<classifier::EvalReport> report;  // empty when the cell failed
  std::string error_kind;
  std::string error_message;
  double seconds = 0;
  std::vector<std::string> checkpoints;

  bool ok() const { return report.has_value(); }
};

struct RunRecord {
  std::string format_version = kRecordFormatVersion;
  std::string config_hash;
  std::vector<CellResult> cells;
  std::map<std::string, double> timings;  // stage -> wall-clock seconds
  std::vector<std::string> checkpoints;   // shared (per seed / per episode) checkpoints

  const CellResult* find(const CellKey& k) const {
    for (const auto& c : cells)
      if (c.key == k) return &c;
    return nullptr;
  }
};

/// The cells a config asks for, in execution order: per seed, per n_shot,
/// real-only (m = 0) first, then augmented at m and at each m_sweep value.
inline std::vector<CellKey> expected_cells(const ExperimentConfig& c) {
  std::set<int> ms{c.selection.m};
  ms.insert(c.selection.m_sweep.begin(), c.selection.m_sweep.end());
  std::vector<CellKey> out;
  for (auto seed : c.seeds)
    for (int n : c.n_shots)
      for (const auto& arm : c.arms) {
        if (arm == "real-only")
          out.push_back({arm, seed, n, 0});
        else
          for (int m : ms) out.push_back({arm, seed, n, m});
      }
  return out;
}

/// Seeds of every stage, split off one master seed. The four top-level
/// streams follow SeedStream; per-episode seeds are keyed by n_shot.
struct SeedPlan {
  std::uint64_t data, split, gan, classifier;

  explicit SeedPlan(std::uint64_t master)
      : data(stream_seed(master, SeedStream::data)),
        split(stream_seed(master, SeedStream::split)),
        gan(stream_seed(master, SeedStream::gan)),
        classifier(stream_seed(master, SeedStream::classifier)) {}

  std::uint64_t episode(int n_shot) const { return derive_seed(split, static_cast<std::uint64_t>(n_shot)); }
  std::uint64_t finetune(int n_shot) const { return derive_seed(derive_seed(gan, 0x100), static_cast<std::uint64_t>(n_shot)); }
  std::uint64_t pool(int n_shot) const { return derive_seed(derive_seed(gan, 0x200), static_cast<std::uint64_t>(n_shot)); }
  std::uint64_t cls(int n_shot) const { return derive_seed(classifier, static_cast<std::uint64_t>(n_shot)); }
};

/// HALLUC_CACHE_DIR when set, otherwise <output_dir>/cache.
inline io::fs::path cache_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("HALLUC_CACHE_DIR"); env && *env) return env;
  return io::fs::path(c.output_dir) / "cache";
}

/// Identity of a pretrained base model: dataset, split and the GanHyper
/// fields pretraining reads.
inline std::string pretrain_key(const ExperimentConfig& c, const SeedPlan& plan) {
  auto g = gan_to_json(c.gan);
  g.erase("steps_finetune");
  g.erase("class_weight");
  g.erase("class_objective");
  const io::json j = {{"format", tcgan::kCheckpointFormatVersion},
                      {"data", c.dataset_path.empty() ? synth_to_json(c.data) : io::json(c.dataset_path)},
                      {"data_seed", plan.data},
                      {"base_fraction", c.base_fraction},
                      {"split_seed", plan.split},
                      {"gan", g},
                      {"gan_seed", plan.gan}};
  return io::hex64(io::fnv1a(j.dump()));
}

inline io::json record_to_json(const RunRecord& r) {
  io::json cells = io::json::array();
  for (const auto& c : r.cells) {
    io::json j = {{"arm", c.key.arm},
                  {"seed", c.key.seed},
                  {"n_shot", c.key.n_shot},
                  {"m", c.key.m},
                  {"status", c.ok() ? "ok" : "error"},
                  {"seconds", c.seconds},
                  {"checkpoints", c.checkpoints}};
    if (c.ok())
      j["report"] = classifier::report_to_json(*c.report);
    else
      j["error"] = {{"kind", c.error_kind}, {"message", c.error_message}};
    cells.push_back(std::move(j));
  }
  return {{"format_version", r.format_version},
          {"config_hash", r.config_hash},
          {"timings", r.timings},
          {"checkpoints", r.checkpoints},
          {"cells", cells}};
}

inline RunRecord record_from_json(const io::json& j) {
  RunRecord r;
  try {
    r.format_version = j.at("format_version").get<std::string>();
    if (r.format_version != kRecordFormatVersion) throw FormatError("run record: unsupported format_version");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.timings = j.at("timings").get<std::map<std::string, double>>();
    r.checkpoints = j.at("checkpoints").get<std::vector<std::string>>();
    for (const auto& cj : j.at("cells")) {
      CellResult c;
      c.key = {cj.at("arm").get<std::string>(), cj.at("seed").get<std::uint64_t>(), cj.at("n_shot").get<int>(),
               cj.at("m").get<int>()};
      c.seconds = cj.at("seconds").get<double>();
      c.checkpoints = cj.at("checkpoints").get<std::vector<std::string>>();
      if (cj.at("status").get<std::string>() == "ok") {
        c.report = classifier::report_from_json(cj.at("report"));
      } else {
        c.error_kind = cj.at("error").at("kind").get<std::string>();
        c.error_message = cj.at("error").at("message").get<std::string>();
      }
      r.cells.push_back(std::move(c));
    }
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("run record: ") + e.what());
  }
  return r;
}

inline RunRecord load_record(const io::fs::path& path) {
  const auto p = io::fs::is_directory(path) ? path / "record.json" : path;
  return record_from_json(io::read_json(p));
}

/// Per-seed augmented-minus-real-only table at each n_shot, as CSV with
/// columns seed,n_shot,m,real_only,augmented,delta. Cells missing on either
/// side are written as NA.
inline std::string comparison_csv(const ExperimentConfig& c, const RunRecord& r) {
  std::string out = "seed,n_shot,m,real_only,augmented,delta\n";
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (auto seed : c.seeds)
    for (int n : c.n_shots) {
      const auto* base = r.find({"real-only", seed, n, 0});
      const auto* aug = r.find({"augmented", seed, n, c.selection.m});
      const bool b = base && base->ok(), a = aug && aug->ok();
      out += std::to_string(seed) + "," + std::to_string(n) + "," + std::to_string(c.selection.m) + ",";
      out += (b ? fmt(base->report->top1_accuracy) : "NA") + ",";
      out += (a ? fmt(aug->report->top1_accuracy) : "NA") + ",";
      out += (a && b ? fmt(aug->report->top1_accuracy - base->report->top1_accuracy) : "NA") + "\n";
    }
  return out;
}

using Logger = std::function<void(const std::string&)>;

namespace detail {

/// A lazily computed stage whose failure is remembered, so every dependent
/// cell reports the same error instead of retrying.
template <class T>
class Stage {
 public:
  template <class F>
  const T& get(F&& make) {
    if (error_) std::rethrow_exception(error_);
    if (!value_) {
      try {
        value_ = std::make_unique<T>(make());
      } catch (...) {
        error_ = std::current_exception();
        throw;
      }
    }
    return *value_;
  }

 private:
  std::unique_ptr<T> value_;
  std::exception_ptr error_;
};

class Stopwatch {
 public:
  explicit Stopwatch(double& sink) : sink_(sink), t0_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() { sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point t0_;
};

inline std::pair<std::string, std::string> describe(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const Error& err) {
    return {err.kind(), err.what()};
  } catch (const std::exception& err) {
    return {"internal", err.what()};
  }
}

}  // namespace detail

/// Runs every cell of `config`, persisting as it goes:
///
///   <out>/config.json                    config plus its hash
///   <out>/record.json                    the RunRecord, rewritten after each cell
///   <out>/comparison.csv                 per-seed augmented vs real-only deltas
///   <out>/seeds/s<seed>/split.json
///   <out>/seeds/s<seed>/n<k>/episode.json
///   <out>/seeds/s<seed>/n<k>/gan_finetuned/
///   <out>/seeds/s<seed>/n<k>/selected/   top-ranked candidates (pool format)
///   <out>/cells/<cell id>/               report.json and the classifier checkpoint
///   <cache>/pretrain-<key>/              pretrained base models, shared across runs
///
/// Cells whose report already exists are reused; an output directory written
/// under a different config hash is refused. A failing stage fails only the
/// cells that depend on it.
inline RunRecord run_experiment(const ExperimentConfig& config, const Logger& log = {}) {
  validate(config);
  const io::fs::path out = config.output_dir;
  const std::string hash = config_hash(config);
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };

  if (io::fs::exists(out / "config.json")) {
    const auto prev = io::read_json(out / "config.json");
    if (prev.value("config_hash", std::string()) != hash)
      throw ConfigError("output directory " + out.string() + " holds results of config " +
                        prev.value("config_hash", std::string("?")) + ", not " + hash + "; refusing to mix");
  }
  io::fs::create_directories(out);
  {
    auto j = to_json(config);
    j["config_hash"] = hash;
    io::write_json(out / "config.json", j);
  }

  RunRecord record;
  record.config_hash = hash;
  for (const char* s : {"data", "pretrain", "finetune", "pool", "classifier", "total"}) record.timings[s] = 0;
  const auto started = std::chrono::steady_clock::now();

  const auto cells = expected_cells(config);
  const io::fs::path cache = cache_dir(config);
  int max_m = 0;
  for (const auto& k : cells) max_m = std::max(max_m, k.m);

  std::uint64_t current_seed = 0;
  bool have_seed = false;
  // Per-seed and per-episode state, rebuilt when the seed or n_shot changes.
  std::unique_ptr<detail::Stage<data::Dataset>> dataset;
  std::unique_ptr<detail::Stage<data::SplitConfig>> split;
  std::unique_ptr<detail::Stage<tcgan::GanModel<float>>> pretrained;
  std::map<int, std::unique_ptr<detail::Stage<data::Episode>>> episodes;
  std::map<int, std::unique_ptr<detail::Stage<selection::CandidatePool>>> pools;

  for (const auto& key : cells) {
    const SeedPlan plan(key.seed);
    if (!have_seed || key.seed != current_seed) {
      have_seed = true;
      current_seed = key.seed;
      dataset = std::make_unique<detail::Stage<data::Dataset>>();
      split = std::make_unique<detail::Stage<data::SplitConfig>>();
      pretrained = std::make_unique<detail::Stage<tcgan::GanModel<float>>>();
      episodes.clear();
      pools.clear();
    }
    const io::fs::path seed_dir = out / "seeds" / ("s" + std::to_string(key.seed));
    const io::fs::path ep_dir = seed_dir / ("n" + std::to_string(key.n_shot));
    const io::fs::path cell_dir = out / "cells" / key.id();

    CellResult result;
    result.key = key;
    const auto t0 = std::chrono::steady_clock::now();

    if (io::fs::exists(cell_dir / "report.json")) {
      result.report = classifier::report_from_json(io::read_json(cell_dir / "report.json"));
      result.checkpoints.push_back((cell_dir / "classifier").string());
      say("cell " + key.id() + ": reused");
    } else {
      try {
        auto get_dataset = [&]() -> const data::Dataset& {
          return dataset->get([&] {
            detail::Stopwatch w(record.timings["data"]);
            if (!config.dataset_path.empty()) return data::load_dataset(config.dataset_path);
            auto spec = config.data;
            spec.seed = plan.data;
            return data::synth_dataset(spec);
          });
        };
        auto get_split = [&]() -> const data::SplitConfig& {
          return split->get([&] {
            auto s = data::make_split(get_dataset(), config.base_fraction, plan.split);
            io::write_json(seed_dir / "split.json", data::split_to_json(s));
            return s;
          });
        };
        auto& ep_stage = episodes[key.n_shot];
        if (!ep_stage) ep_stage = std::make_unique<detail::Stage<data::Episode>>();
        const auto& episode = ep_stage->get([&] {
          auto e = data::sample_episode(get_dataset(), get_split(), key.n_shot, config.query_per_class,
                                        plan.episode(key.n_shot));
          io::write_json(ep_dir / "episode.json", data::episode_to_json(e));
          return e;
        });

        std::map<data::ClassId, std::vector<selection::Candidate>> selected;
        if (key.arm == "real-only") {
          for (auto c : episode.novel_classes) selected[c];
        } else {
          auto& pool_stage = pools[key.n_shot];
          if (!pool_stage) pool_stage = std::make_unique<detail::Stage<selection::CandidatePool>>();
          const auto& pool = pool_stage->get([&] {
            const auto& base = pretrained->get([&] {
              const io::fs::path dir = cache / ("pretrain-" + pretrain_key(config, plan));
              if (io::fs::exists(dir / "model_manifest.json")) {
                say("seed " + std::to_string(key.seed) + ": pretrained model from cache " + dir.string());
                return tcgan::load_gan<float>(dir);
              }
              say("seed " + std::to_string(key.seed) + ": pretraining (" + std::to_string(config.gan.steps_pretrain) +
                  " steps)");
              detail::Stopwatch w(record.timings["pretrain"]);
              auto hyper = config.gan;
              hyper.seed = plan.gan;
              auto m = tcgan::pretrain_base<float>(get_dataset(), get_split(), hyper);
              tcgan::save_gan(m, dir);
              return m;
            });
            record.checkpoints.push_back((cache / ("pretrain-" + pretrain_key(config, plan))).string());

            auto hyper = config.gan;
            hyper.seed = plan.finetune(key.n_shot);
            tcgan::GanModel<float> tuned;
            {
              say("seed " + std::to_string(key.seed) + " n_shot " + std::to_string(key.n_shot) + ": finetuning");
              detail::Stopwatch w(record.timings["finetune"]);
              tuned = tcgan::finetune_novel<float>(base, episode, hyper);
              tcgan::save_gan(tuned, ep_dir / "gan_finetuned");
              record.checkpoints.push_back((ep_dir / "gan_finetuned").string());
            }
            detail::Stopwatch w(record.timings["pool"]);
            auto p = selection::build_pool(tuned, episode, config.selection.pool_size, plan.pool(key.n_shot),
                                           config.selection.rule);
            auto kept = p;
            for (auto& [c, v] : kept.per_class) {
              selection::sort_by_score(v);
              v.resize(std::min(v.size(), static_cast<std::size_t>(max_m)));
            }
            save_pool(kept, episode.image_shape, ep_dir / "selected");
            return p;
          });
          selected = selection::select_top_m(pool, key.m);
        }

        const auto augmented = selection::build_augmented(episode, selected);
        auto hyper = config.classifier;
        hyper.seed = plan.cls(key.n_shot);
        classifier::ClassifierModel<float> model;
        {
          detail::Stopwatch w(record.timings["classifier"]);
          model = classifier::train_classifier<float>(augmented, hyper, episode.novel_classes);
        }
        auto report = classifier::evaluate(model, episode.query);
        report.n_shot = key.n_shot;
        report.m = key.m;
        report.seed = key.seed;
        report.arm = key.arm;

        const io::fs::path staging = cell_dir.string() + ".staging";
        io::fs::remove_all(staging);
        io::fs::create_directories(staging);
        classifier::save_classifier(model, staging / "classifier");
        io::write_json(staging / "report.json", classifier::report_to_json(report));
        io::commit_directory(staging, cell_dir);
        result.report = report;
        result.checkpoints.push_back((cell_dir / "classifier").string());
        say("cell " + key.id() + ": top1 " + std::to_string(report.top1_accuracy));
      } catch (...) {
        std::tie(result.error_kind, result.error_message) = detail::describe(std::current_exception());
        say("cell " + key.id() + ": " + result.error_kind + " error: " + result.error_message);
      }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record.cells.push_back(std::move(result));
    io::write_json(out / "record.json", record_to_json(record));
  }

  record.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::sort(record.checkpoints.begin(), record.checkpoints.end());
  record.checkpoints.erase(std::unique(record.checkpoints.begin(), record.checkpoints.end()), record.checkpoints.end());
  io::write_json(out / "record.json", record_to_json(record));
  io::write_file_atomic(out / "comparison.csv", comparison_csv(config, record));
  return record;
}

}  // namespace halluc::harness
