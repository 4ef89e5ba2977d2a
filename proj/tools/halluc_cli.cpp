// Command-line front end. Each stage subcommand reproduces the matching step
// of run-experiment when given the same config and master seed.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "halluc/halluc.hpp"

namespace fs = std::filesystem;
using namespace halluc;
using io::json;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::optional<int> n_shot, m, pool_size;
  std::string data, model, episode, split, pool, selected, record, scoring_rule, arm;
};

harness::ExperimentConfig load(const Options& o) {
  auto c = o.config.empty() ? harness::ExperimentConfig{} : harness::load_config(o.config);
  if (o.n_shot) c.n_shots = {*o.n_shot};
  if (o.m) c.selection.m = *o.m;
  if (o.pool_size) c.selection.pool_size = *o.pool_size;
  if (!o.scoring_rule.empty()) c.selection.rule = selection::scoring_rule_from_string(o.scoring_rule);
  harness::validate(c);
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

template <class F>
auto parse_json(const fs::path& path, F&& f) {
  const auto j = io::read_json(path);
  try {
    return f(j);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

void cmd_synth(const Options& o) {
  require(o.out, "--out");
  auto c = load(o);
  auto spec = c.data;
  spec.seed = harness::SeedPlan(o.seed).data;
  const auto ds = data::synth_dataset(spec);
  data::save_dataset(ds, o.out);
  print({{"dataset", o.out}, {"samples", ds.size()}, {"classes", ds.classes()}});
}

void cmd_pretrain(const Options& o) {
  require(o.data, "--data");
  require(o.out, "--out");
  auto c = load(o);
  const harness::SeedPlan plan(o.seed);
  const auto ds = data::load_dataset(o.data);
  const auto split = data::make_split(ds, c.base_fraction, plan.split);
  auto hyper = c.gan;
  hyper.seed = plan.gan;
  tcgan::TrainTrace trace;
  auto model = tcgan::pretrain_base<float>(ds, split, hyper, &trace);
  tcgan::save_gan(model, o.out);
  io::write_json(fs::path(o.out) / "split.json", data::split_to_json(split));
  io::write_json(fs::path(o.out) / "trace.json", {{"loss_d", trace.loss_d}, {"loss_g", trace.loss_g}});
  print({{"model", o.out}, {"steps", hyper.steps_pretrain}, {"base_classes", split.base_classes}});
}

void cmd_finetune(const Options& o) {
  require(o.data, "--data");
  require(o.model, "--model");
  require(o.out, "--out");
  if (!o.n_shot) throw ConfigError("missing required option --n-shot");
  auto c = load(o);
  const harness::SeedPlan plan(o.seed);
  const auto ds = data::load_dataset(o.data);
  const fs::path split_path = o.split.empty() ? fs::path(o.model) / "split.json" : fs::path(o.split);
  const auto split = parse_json(split_path, data::split_from_json);
  const auto episode = data::sample_episode(ds, split, *o.n_shot, c.query_per_class, plan.episode(*o.n_shot));
  auto hyper = c.gan;
  hyper.seed = plan.finetune(*o.n_shot);
  tcgan::TrainTrace trace;
  auto tuned = tcgan::finetune_novel<float>(tcgan::load_gan<float>(o.model), episode, hyper, &trace);
  tcgan::save_gan(tuned, o.out);
  io::write_json(fs::path(o.out) / "episode.json", data::episode_to_json(episode));
  io::write_json(fs::path(o.out) / "trace.json", {{"loss_d", trace.loss_d}, {"loss_g", trace.loss_g}});
  print({{"model", o.out},
         {"novel_classes", episode.novel_classes},
         {"support_accuracy", tcgan::class_head_accuracy(tuned, episode.support)}});
}

data::Episode load_episode(const Options& o, const data::Dataset& ds) {
  const fs::path path = o.episode.empty() ? fs::path(o.model) / "episode.json" : fs::path(o.episode);
  return parse_json(path, [&](const json& j) { return data::episode_from_json(j, ds); });
}

void cmd_generate(const Options& o) {
  require(o.data, "--data");
  require(o.model, "--model");
  require(o.out, "--out");
  auto c = load(o);
  const auto ds = data::load_dataset(o.data);
  const auto episode = load_episode(o, ds);
  const auto model = tcgan::load_gan<float>(o.model);
  const auto pool = selection::build_pool(model, episode, c.selection.pool_size,
                                          harness::SeedPlan(o.seed).pool(episode.n_shot), c.selection.rule);
  harness::save_pool(pool, episode.image_shape, o.out);
  print({{"pool", o.out}, {"pool_size", pool.pool_size}, {"scoring_rule", selection::to_string(pool.rule)}});
}

void cmd_select(const Options& o) {
  require(o.pool, "--pool");
  require(o.out, "--out");
  if (!o.m) throw ConfigError("missing required option --m");
  const auto loaded = harness::load_pool(o.pool);
  selection::CandidatePool top;
  top.pool_size = *o.m;
  top.rule = loaded.pool.rule;
  top.per_class = selection::select_top_m(loaded.pool, *o.m);
  harness::save_pool(top, loaded.image_shape, o.out);
  print({{"selected", o.out}, {"m", *o.m}});
}

void cmd_train_classifier(const Options& o) {
  require(o.data, "--data");
  require(o.episode, "--episode");
  require(o.out, "--out");
  auto c = load(o);
  const auto ds = data::load_dataset(o.data);
  const auto episode = load_episode(o, ds);
  std::map<data::ClassId, std::vector<selection::Candidate>> chosen;
  for (auto cls : episode.novel_classes) chosen[cls];
  int m = 0;
  if (!o.selected.empty()) {
    const auto loaded = harness::load_pool(o.selected);
    chosen = loaded.pool.per_class;
    m = loaded.pool.pool_size;
  }
  auto hyper = c.classifier;
  hyper.seed = harness::SeedPlan(o.seed).cls(episode.n_shot);
  auto model = classifier::train_classifier<float>(selection::build_augmented(episode, chosen), hyper,
                                                   episode.novel_classes);
  classifier::save_classifier(model, o.out);
  const std::string arm = o.arm.empty() ? (o.selected.empty() ? "real-only" : "augmented") : o.arm;
  io::write_json(fs::path(o.out) / "training.json",
                 {{"arm", arm}, {"m", m}, {"n_shot", episode.n_shot}, {"seed", o.seed}});
  print({{"classifier", o.out}, {"arm", arm}, {"m", m}});
}

void cmd_evaluate(const Options& o) {
  require(o.data, "--data");
  require(o.model, "--model");
  require(o.episode, "--episode");
  const auto ds = data::load_dataset(o.data);
  const auto episode = load_episode(o, ds);
  const auto model = classifier::load_classifier<float>(o.model);
  auto report = classifier::evaluate(model, episode.query);
  report.n_shot = episode.n_shot;
  if (const auto meta = fs::path(o.model) / "training.json"; fs::exists(meta)) {
    const auto j = io::read_json(meta);
    report.arm = j.value("arm", std::string());
    report.m = j.value("m", 0);
    report.seed = j.value("seed", std::uint64_t{0});
  }
  const auto j = classifier::report_to_json(report);
  if (!o.out.empty()) io::write_json(o.out, j);
  print(j);
}

void cmd_run(const Options& o) {
  require(o.config, "--config");
  auto c = load(o);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed_given) c.seeds = {o.seed};
  const auto record = harness::run_experiment(c, [](const std::string& s) { std::cerr << s << "\n"; });
  int failed = 0;
  for (const auto& cell : record.cells) failed += cell.ok() ? 0 : 1;
  std::cout << harness::summary_csv(harness::summarize(record));
  if (failed > 0)
    throw Error("cells", std::to_string(failed) + " of " + std::to_string(record.cells.size()) +
                             " cells failed; see " + (fs::path(c.output_dir) / "record.json").string());
}

void cmd_summarize(const Options& o) {
  require(o.record, "--record");
  const auto csv = harness::summary_csv(harness::summarize(harness::load_record(o.record)));
  if (!o.out.empty()) io::write_file_atomic(o.out, csv);
  std::cout << csv;
}

void cmd_plot(const Options& o) {
  require(o.record, "--record");
  require(o.out, "--out");
  const auto files = harness::plot_report(harness::load_record(o.record), o.out);
  print({{"report", (fs::path(o.out) / files.markdown).string()}, {"m_curves", files.m_curves}});
}

int fail(const std::string& command, const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-conditional GAN hallucination for few-shot classification"};
  app.require_subcommand(1);
  Options o;

  struct Flags {
    bool config, seed, n_shot, m, pool_size, data, model, episode, split, pool, selected, record, rule, arm;
  };
  std::map<std::string, std::function<void(const Options&)>> handlers;
  auto add = [&](const std::string& name, const std::string& help, Flags f, std::function<void(const Options&)> h) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--out", o.out, "Output path");
    if (f.config) sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    if (f.seed) sub->add_option("--seed", o.seed, "Master seed");
    if (f.n_shot) sub->add_option_function<int>("--n-shot", [&](int v) { o.n_shot = v; }, "Support samples per class");
    if (f.m) sub->add_option_function<int>("--m", [&](int v) { o.m = v; }, "Selected candidates per class");
    if (f.pool_size)
      sub->add_option_function<int>("--pool-size", [&](int v) { o.pool_size = v; }, "Candidates per class (N)");
    if (f.data) sub->add_option("--data", o.data, "Dataset directory");
    if (f.model) sub->add_option("--model", o.model, "Model checkpoint directory");
    if (f.episode) sub->add_option("--episode", o.episode, "Episode file (episode.json)");
    if (f.split) sub->add_option("--split", o.split, "Split file (split.json)");
    if (f.pool) sub->add_option("--pool", o.pool, "Candidate pool directory");
    if (f.selected) sub->add_option("--selected", o.selected, "Selected candidates directory");
    if (f.record) sub->add_option("--record", o.record, "Run directory or record.json");
    if (f.rule) sub->add_option("--scoring-rule", o.scoring_rule, "class-only or realism-gated");
    if (f.arm) sub->add_option("--arm", o.arm, "Arm label stored with the classifier");
    handlers[name] = std::move(h);
  };
  //         config seed  nshot m     pool  data  model ep    split pool  sel   rec   rule  arm
  add("synth-data", "Write a synthetic dataset",
      {true, true, false, false, false, false, false, false, false, false, false, false, false, false}, cmd_synth);
  add("pretrain", "Adversarial pretraining on base classes",
      {true, true, false, false, false, true, false, false, false, false, false, false, false, false}, cmd_pretrain);
  add("finetune", "Sample an episode and finetune on its support",
      {true, true, true, false, false, true, true, false, true, false, false, false, false, false}, cmd_finetune);
  add("generate", "Generate and score a candidate pool",
      {true, true, false, false, true, true, true, true, false, false, false, false, true, false}, cmd_generate);
  add("select", "Keep the top-m candidates per class",
      {false, false, false, true, false, false, false, false, false, true, false, false, false, false}, cmd_select);
  add("train-classifier", "Train the classifier on support plus selected candidates",
      {true, true, false, false, false, true, false, true, false, false, true, false, false, true},
      cmd_train_classifier);
  add("evaluate", "Evaluate a classifier on the episode query set",
      {false, false, false, false, false, true, true, true, false, false, false, false, false, false}, cmd_evaluate);
  add("run-experiment", "Run the full pipeline over all configured cells",
      {true, true, true, true, true, false, false, false, false, false, false, false, true, false}, cmd_run);
  add("summarize", "Per-group mean and std of top-1 accuracy as CSV",
      {false, false, false, false, false, false, false, false, false, false, false, true, false, false},
      cmd_summarize);
  add("plot", "Write charts and a markdown report",
      {false, false, false, false, false, false, false, false, false, false, false, true, false, false}, cmd_plot);

  std::string command = "halluc";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(command, "usage", e.what(), 2);
  }
  for (auto* sub : app.get_subcommands()) {
    command = sub->get_name();
    if (const auto* seed = sub->get_option_no_throw("--seed")) o.seed_given = seed->count() > 0;
  }
  try {
    handlers.at(command)(o);
    return 0;
  } catch (const ConfigError& e) {
    return fail(command, e.kind(), e.what(), 2);
  } catch (const Error& e) {
    return fail(command, e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail(command, "internal", e.what(), 1);
  }
}
