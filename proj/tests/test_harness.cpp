#include <gtest/gtest.h>

#include <filesystem>

#include "support/oracles.hpp"

using namespace halluc;
using namespace halluc::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("halluc_harness_" + name);
  fs::remove_all(d);
  return d;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.data.num_classes = 4;
  c.data.samples_per_class = 6;
  c.data.image_shape = {3, 8, 8};
  c.data.embed_dim = 4;
  c.data.noise_level = 0.1;
  c.base_fraction = 0.5;
  c.query_per_class = 3;
  c.gan.noise_dim = 4;
  c.gan.batch_size = 4;
  c.gan.steps_pretrain = 4;
  c.gan.steps_finetune = 4;
  c.gan.widths = {{8, 4}, {4, 8}, 4, 8};
  c.selection.pool_size = 6;
  c.selection.m = 3;
  c.classifier.steps = 8;
  c.classifier.batch_size = 4;
  c.classifier.channels = {4};
  c.n_shots = {1, 2};
  c.seeds = {0, 1};
  c.output_dir = out.string();
  return c;
}

CellResult ok_cell(const std::string& arm, std::uint64_t seed, int n, int m, double acc) {
  CellResult c;
  c.key = {arm, seed, n, m};
  classifier::EvalReport r;
  r.top1_accuracy = acc;
  c.report = r;
  return c;
}

CellResult failed_cell(const std::string& arm, std::uint64_t seed, int n, int m) {
  CellResult c;
  c.key = {arm, seed, n, m};
  c.error_kind = "data";
  c.error_message = "boom";
  return c;
}

}  // namespace

TEST(Config, JsonRoundTripAndDefaults) {
  auto c = tiny_config("runs/x");
  c.selection.m_sweep = {1, 2};
  c.selection.rule = selection::ScoringRule::realism_gated;
  c.gan.class_objective = tcgan::ClassObjective::probability;
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_EQ(config_from_json(json::object()), ExperimentConfig{});
  const auto partial = config_from_json(json::parse(R"({"selection": {"m": 5}})"));
  EXPECT_EQ(partial.selection.m, 5);
  EXPECT_EQ(partial.selection.pool_size, 256);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json(json::parse(R"({"sedes": [1]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"gan": {"lr": 0.1}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"selection": {"m": "ten"}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"selection": {"m": 300}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"arms": ["oracle"]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"n_shots": [1, 1]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"selection": {"scoring_rule": "best"}})")), ConfigError);
}

TEST(Config, LoadMapsParseErrorsToConfigErrors) {
  const auto dir = fresh_dir("cfgfile");
  io::write_file_atomic(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = tiny_config("a");
  auto b = tiny_config("b");
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.classifier.steps += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Cells, ExpectedCardinality) {
  auto c = tiny_config("x");
  c.selection.m_sweep = {3, 5};
  const auto cells = expected_cells(c);
  // Per seed and n_shot: one real-only cell plus augmented at m in {3, 5}.
  EXPECT_EQ(cells.size(), 2u * 2u * 3u);
  EXPECT_EQ(cells.front().arm, "real-only");
  EXPECT_EQ(cells.front().m, 0);
  EXPECT_EQ(CellKey({"augmented", 3, 5, 30}).id(), "augmented_s3_n5_m30");
}

TEST(Summary, MeanAndPopulationStd) {
  const auto [mu, sd] = mean_std({0.5, 0.6, 0.7, 0.6, 0.6});
  EXPECT_NEAR(mu, 0.6, 1e-12);
  EXPECT_NEAR(sd, std::sqrt(0.02 / 5), 1e-12);
  EXPECT_NEAR(sd, 0.0632, 1e-4);
  EXPECT_EQ(mean_std({0.4}).second, 0.0);
  EXPECT_THROW(mean_std({}), DataError);
}

TEST(Summary, GroupsRowsAndMarksGaps) {
  RunRecord r;
  for (std::uint64_t s : {0, 1}) {
    r.cells.push_back(ok_cell("real-only", s, 1, 0, 0.5 + 0.1 * s));
    r.cells.push_back(s == 1 ? failed_cell("augmented", s, 1, 30) : ok_cell("augmented", s, 1, 30, 0.8));
  }
  const auto rows = summarize(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].arm, "real-only");
  EXPECT_NEAR(*rows[0].mean_top1, 0.55, 1e-12);
  EXPECT_NEAR(*rows[0].std_top1, 0.05, 1e-12);
  EXPECT_EQ(rows[1].seeds, 1);
  EXPECT_EQ(rows[1].expected_seeds, 2);
  EXPECT_FALSE(rows[1].mean_top1);
  const auto csv = summary_csv(rows);
  EXPECT_EQ(csv,
            "arm,n_shot,m,seeds,mean_top1,std_top1\n"
            "real-only,1,0,2,0.550000,0.050000\n"
            "augmented,1,30,1,NA,NA\n");
  EXPECT_THROW(summarize(RunRecord{}), DataError);
}

TEST(Summary, SingleSeedHasZeroStd) {
  RunRecord r;
  r.cells.push_back(ok_cell("real-only", 3, 2, 0, 0.7));
  EXPECT_EQ(*summarize(r)[0].std_top1, 0.0);
}

TEST(Record, JsonRoundTrip) {
  RunRecord r;
  r.config_hash = "abc";
  r.timings = {{"total", 1.5}};
  r.cells.push_back(ok_cell("real-only", 0, 1, 0, 0.25));
  r.cells.push_back(failed_cell("augmented", 0, 1, 30));
  const auto back = record_from_json(record_to_json(r));
  EXPECT_EQ(record_to_json(back), record_to_json(r));
  EXPECT_FALSE(back.cells[1].ok());
  EXPECT_EQ(back.cells[1].error_message, "boom");
  auto j = record_to_json(r);
  j["format_version"] = "9";
  EXPECT_THROW(record_from_json(j), FormatError);
}

TEST(Report, SeriesAndSweepOmission) {
  const auto dir = fresh_dir("report");
  RunRecord r;
  for (std::uint64_t s : {0, 1})
    for (int n : {1, 5}) {
      r.cells.push_back(ok_cell("real-only", s, n, 0, 0.4));
      r.cells.push_back(ok_cell("augmented", s, n, 30, 0.5));
    }
  auto files = plot_report(r, dir);
  EXPECT_TRUE(files.m_curves.empty());
  const auto svg = io::read_file(dir / files.n_shot_curve);
  std::size_t polylines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(io::read_file(dir / "report.md").find("Omitted"), std::string::npos);

  for (std::uint64_t s : {0, 1})
    for (int n : {1, 5}) r.cells.push_back(ok_cell("augmented", s, n, 10, 0.45));
  files = plot_report(r, dir);
  EXPECT_EQ(files.m_curves.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "accuracy_vs_m_n5.svg"));
  EXPECT_EQ(io::read_file(dir / "summary.csv"), summary_csv(summarize(r)));
  fs::remove_all(dir);
}

TEST(Report, UnwritableDestinationIsAnIoError) {
  const auto dir = fresh_dir("report_bad");
  io::write_file_atomic(dir / "file", "x");
  RunRecord r;
  r.cells.push_back(ok_cell("real-only", 0, 1, 0, 0.5));
  EXPECT_THROW(plot_report(r, dir / "file" / "sub"), IoError);
  fs::remove_all(dir);
}

TEST(Report, ChartIsByteIdenticalAcrossCalls) {
  std::vector<Series> s{{"a", {1, 2}, {0.2, 0.4}, {0.01, 0.02}}};
  EXPECT_EQ(line_chart_svg("t", "x", s), line_chart_svg("t", "x", s));
}

TEST(PoolIo, RoundTrip) {
  const auto dir = fresh_dir("pool");
  selection::CandidatePool p;
  p.pool_size = 2;
  p.rule = selection::ScoringRule::realism_gated;
  for (data::ClassId c : {3, 7})
    for (std::size_t i = 0; i < 2; ++i) {
      selection::Candidate cand;
      cand.image.assign(2 * 2 * 1, 0.1f * static_cast<float>(i + c));
      cand.text_embedding = {1.0f, -0.5f};
      cand.intended_class = c;
      cand.source_embedding_index = i;
      cand.z_seed = derive_seed(c, i);
      cand.realism_score = 0.3;
      cand.class_posterior = 1.0 / 3.0;
      cand.combined_score = 0.1;
      cand.generation_index = i;
      p.per_class[c].push_back(cand);
    }
  save_pool(p, {1, 2, 2}, dir);
  const auto back = load_pool(dir);
  EXPECT_EQ(back.pool, p);
  EXPECT_EQ(back.image_shape, (data::ImageShape{1, 2, 2}));
  fs::resize_file(dir / "images.f32", 4);
  EXPECT_THROW(load_pool(dir), FormatError);
  fs::remove_all(dir);
}

TEST(Experiment, RunsEveryCellAndIsDeterministic) {
  const auto a = fresh_dir("run_a"), b = fresh_dir("run_b");
  const auto ra = run_experiment(tiny_config(a));
  const auto rb = run_experiment(tiny_config(b));
  ASSERT_EQ(ra.cells.size(), expected_cells(tiny_config(a)).size());
  for (std::size_t i = 0; i < ra.cells.size(); ++i) {
    ASSERT_TRUE(ra.cells[i].ok()) << ra.cells[i].error_message;
    EXPECT_EQ(ra.cells[i].key, rb.cells[i].key);
    EXPECT_EQ(*ra.cells[i].report, *rb.cells[i].report);
  }
  EXPECT_EQ(io::read_file(a / "comparison.csv"), io::read_file(b / "comparison.csv"));
  EXPECT_TRUE(fs::exists(a / "seeds/s0/split.json"));
  EXPECT_TRUE(fs::exists(a / "seeds/s1/n2/episode.json"));
  EXPECT_TRUE(fs::exists(a / "seeds/s0/n1/gan_finetuned/model_manifest.json"));
  EXPECT_TRUE(fs::exists(a / "cells/augmented_s1_n2_m3/report.json"));
  const auto sel = load_pool(a / "seeds/s0/n1/selected");
  for (const auto& [_, v] : sel.pool.per_class) EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(record_to_json(load_record(a)), record_to_json(ra));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, ResumesAndRefusesForeignConfig) {
  const auto dir = fresh_dir("resume");
  const auto first = run_experiment(tiny_config(dir));
  std::vector<std::string> lines;
  const auto again = run_experiment(tiny_config(dir), [&](const std::string& s) { lines.push_back(s); });
  for (std::size_t i = 0; i < first.cells.size(); ++i) EXPECT_EQ(*first.cells[i].report, *again.cells[i].report);
  EXPECT_EQ(std::count_if(lines.begin(), lines.end(), [](const auto& s) { return s.ends_with(": reused"); }),
            static_cast<long>(first.cells.size()));
  auto other = tiny_config(dir);
  other.classifier.steps = 9;
  EXPECT_THROW(run_experiment(other), ConfigError);
  fs::remove_all(dir);
}

TEST(Experiment, AugmentedWithZeroSelectedEqualsRealOnly) {
  const auto dir = fresh_dir("m0");
  auto c = tiny_config(dir);
  c.selection.m_sweep = {0};
  const auto r = run_experiment(c);
  for (auto s : c.seeds)
    for (int n : c.n_shots) {
      auto base = *r.find({"real-only", s, n, 0})->report;
      auto aug = *r.find({"augmented", s, n, 0})->report;
      aug.arm = base.arm;
      EXPECT_EQ(aug, base);
    }
  fs::remove_all(dir);
}

TEST(Experiment, FailuresStayInTheirCells) {
  const auto dir = fresh_dir("isolate");
  // Every class has exactly 1 + query samples, so 1-shot episodes work and
  // 2-shot episodes cannot be drawn.
  auto spec = tiny_config(dir).data;
  spec.samples_per_class = 4;
  data::save_dataset(data::synth_dataset(spec), dir / "dataset");
  auto c = tiny_config(dir / "run");
  c.dataset_path = (dir / "dataset").string();
  const auto r = run_experiment(c);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.ok(), cell.key.n_shot == 1) << cell.key.id();
    if (!cell.ok()) EXPECT_EQ(cell.error_kind, "data");
  }
  const auto rows = summarize(r);
  for (const auto& row : rows) EXPECT_EQ(row.mean_top1.has_value(), row.n_shot == 1);
  const auto csv = io::read_file(dir / "run/comparison.csv");
  EXPECT_NE(csv.find("0,2,3,NA,NA,NA"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Experiment, CacheDirectoryFollowsEnvironment) {
  const auto c = tiny_config("runs/here");
  unsetenv("HALLUC_CACHE_DIR");
  EXPECT_EQ(cache_dir(c), fs::path("runs/here/cache"));
  setenv("HALLUC_CACHE_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(cache_dir(c), fs::path("/tmp/elsewhere"));
  unsetenv("HALLUC_CACHE_DIR");
}
