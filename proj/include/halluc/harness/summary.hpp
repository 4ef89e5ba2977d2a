#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "halluc/harness/experiment.hpp"

namespace halluc::harness {

/// Marker written in place of a statistic when a group is incomplete.
inline constexpr const char* kGapMarker = "NA";

struct SummaryRow {
  std::string arm;
  int n_shot = 0;
  int m = 0;
  int seeds = 0;           // seeds that produced a report
  int expected_seeds = 0;  // seeds present anywhere in the record
  std::optional<double> mean_top1;  // empty when any seed is missing or failed
  std::optional<double> std_top1;   // population standard deviation
};

/// Mean and population standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) throw DataError("mean_std: no values");
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

/// One row per (arm, n_shot, m) group, in order of first appearance. A group
/// with a failed or absent seed gets no mean/std, so gaps are never averaged
/// away.
inline std::vector<SummaryRow> summarize(const RunRecord& record) {
  if (record.cells.empty()) throw DataError("summarize: run record has no cells");
  std::set<std::uint64_t> all_seeds;
  std::vector<std::tuple<std::string, int, int>> groups;
  for (const auto& c : record.cells) {
    all_seeds.insert(c.key.seed);
    const auto g = std::make_tuple(c.key.arm, c.key.n_shot, c.key.m);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });

  std::vector<SummaryRow> rows;
  for (const auto& [arm, n, m] : groups) {
    SummaryRow row{arm, n, m, 0, static_cast<int>(all_seeds.size()), {}, {}};
    std::vector<double> acc;
    for (auto s : all_seeds) {
      const auto* cell = record.find({arm, s, n, m});
      if (cell && cell->ok()) acc.push_back(cell->report->top1_accuracy);
    }
    row.seeds = static_cast<int>(acc.size());
    if (row.seeds == row.expected_seeds) {
      const auto [mu, sd] = mean_std(acc);
      row.mean_top1 = mu;
      row.std_top1 = sd;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_stat(const std::optional<double>& v) {
  if (!v) return kGapMarker;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "arm,n_shot,m,seeds,mean_top1,std_top1\n";
  for (const auto& r : rows)
    out += r.arm + "," + std::to_string(r.n_shot) + "," + std::to_string(r.m) + "," + std::to_string(r.seeds) + "," +
           format_stat(r.mean_top1) + "," + format_stat(r.std_top1) + "\n";
  return out;
}

}  // namespace halluc::harness
