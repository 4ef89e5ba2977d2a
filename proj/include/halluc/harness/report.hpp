#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "halluc/harness/summary.hpp"

namespace halluc::harness {

struct Series {
  std::string label;
  std::vector<double> x, y, err;
};

namespace detail {

inline std::string fmt(double v, const char* f = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// A small line chart with error bars; y is fixed to [0, 1].
inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  constexpr double W = 560, H = 360, L = 64, R = 150, T = 40, B = 52;
  const double pw = W - L - R, ph = H - T - B;
  double x0 = 0, x1 = 1;
  bool first = true;
  for (const auto& s : series)
    for (double x : s.x) {
      x0 = first ? x : std::min(x0, x);
      x1 = first ? x : std::max(x1, x);
      first = false;
    }
  if (x1 == x0) {
    x0 -= 1;
    x1 += 1;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return T + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt(W, "%.0f") + "\" height=\"" +
       detail::fmt(H, "%.0f") + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + detail::fmt(L) + "\" y=\"24\" font-size=\"14\">" + detail::xml_escape(title) + "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    s += "<line x1=\"" + detail::fmt(L) + "\" x2=\"" + detail::fmt(L + pw) + "\" y1=\"" + detail::fmt(py(y)) + "\" y2=\"" +
         detail::fmt(py(y)) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + detail::fmt(L - 8) + "\" y=\"" + detail::fmt(py(y) + 4) + "\" text-anchor=\"end\">" +
         detail::fmt(y, "%.1f") + "</text>\n";
  }
  std::set<double> ticks;
  for (const auto& se : series) ticks.insert(se.x.begin(), se.x.end());
  for (double x : ticks)
    s += "<text x=\"" + detail::fmt(px(x)) + "\" y=\"" + detail::fmt(T + ph + 18) + "\" text-anchor=\"middle\">" +
         detail::fmt(x, "%g") + "</text>\n";
  s += "<rect x=\"" + detail::fmt(L) + "\" y=\"" + detail::fmt(T) + "\" width=\"" + detail::fmt(pw) + "\" height=\"" +
       detail::fmt(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  s += "<text x=\"" + detail::fmt(L + pw / 2) + "\" y=\"" + detail::fmt(H - 12) + "\" text-anchor=\"middle\">" +
       detail::xml_escape(x_label) + "</text>\n";
  s += "<text transform=\"translate(16," + detail::fmt(T + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">top-1 accuracy</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& se = series[k];
    const std::string col = colours[k % std::size(colours)];
    std::string pts;
    for (std::size_t i = 0; i < se.x.size(); ++i) pts += detail::fmt(px(se.x[i])) + "," + detail::fmt(py(se.y[i])) + " ";
    s += "<polyline fill=\"none\" stroke=\"" + col + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < se.x.size(); ++i) {
      const double e = i < se.err.size() ? se.err[i] : 0.0;
      s += "<line x1=\"" + detail::fmt(px(se.x[i])) + "\" x2=\"" + detail::fmt(px(se.x[i])) + "\" y1=\"" +
           detail::fmt(py(se.y[i] - e)) + "\" y2=\"" + detail::fmt(py(se.y[i] + e)) + "\" stroke=\"" + col + "\"/>\n";
      s += "<circle cx=\"" + detail::fmt(px(se.x[i])) + "\" cy=\"" + detail::fmt(py(se.y[i])) + "\" r=\"3.5\" fill=\"" +
           col + "\"/>\n";
    }
    const double ly = T + 12 + 18.0 * static_cast<double>(k);
    s += "<line x1=\"" + detail::fmt(L + pw + 12) + "\" x2=\"" + detail::fmt(L + pw + 32) + "\" y1=\"" + detail::fmt(ly) +
         "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::fmt(L + pw + 38) + "\" y=\"" + detail::fmt(ly + 4) + "\">" + detail::xml_escape(se.label) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

/// Files written by plot_report, relative to its output directory.
struct ReportFiles {
  std::string summary_csv = "summary.csv";
  std::string n_shot_curve = "accuracy_vs_n_shot.svg";
  std::vector<std::string> m_curves;  // empty when there is no selection sweep
  std::string markdown = "report.md";
};

/// Writes summary.csv, an accuracy-vs-n_shot chart (one series per arm and
/// m), an accuracy-vs-m chart per n_shot when more than one augmented m was
/// run, and report.md embedding them. Incomplete groups are left out of the
/// charts and listed in the report.
inline ReportFiles plot_report(const RunRecord& record, const io::fs::path& out) {
  const auto rows = summarize(record);
  std::error_code ec;
  io::fs::create_directories(out, ec);
  if (ec || !io::fs::is_directory(out)) throw IoError("plot_report: cannot create " + out.string());

  ReportFiles files;
  io::write_file_atomic(out / files.summary_csv, summary_csv(rows));

  std::map<std::pair<std::string, int>, Series> by_arm_m;
  std::map<int, Series> m_curve;  // n_shot -> augmented accuracy over m
  std::map<int, std::set<int>> aug_ms;
  std::vector<std::string> gaps;
  for (const auto& r : rows) {
    if (!r.mean_top1) {
      gaps.push_back(r.arm + " n_shot=" + std::to_string(r.n_shot) + " m=" + std::to_string(r.m) + " (" +
                     std::to_string(r.seeds) + "/" + std::to_string(r.expected_seeds) + " seeds)");
      continue;
    }
    auto& se = by_arm_m[{r.arm, r.m}];
    se.label = r.arm == "real-only" ? r.arm : r.arm + " m=" + std::to_string(r.m);
    se.x.push_back(r.n_shot);
    se.y.push_back(*r.mean_top1);
    se.err.push_back(*r.std_top1);
    if (r.arm == "augmented") {
      aug_ms[r.n_shot].insert(r.m);
      auto& mc = m_curve[r.n_shot];
      mc.label = "augmented, n_shot=" + std::to_string(r.n_shot);
      mc.x.push_back(r.m);
      mc.y.push_back(*r.mean_top1);
      mc.err.push_back(*r.std_top1);
    }
  }
  std::vector<Series> n_series;
  for (auto& [_, se] : by_arm_m) n_series.push_back(se);
  io::write_file_atomic(out / files.n_shot_curve, line_chart_svg("Top-1 accuracy vs n-shot", "n_shot", n_series));

  for (const auto& [n, ms] : aug_ms) {
    if (ms.size() < 2) continue;
    const std::string name = "accuracy_vs_m_n" + std::to_string(n) + ".svg";
    io::write_file_atomic(out / name, line_chart_svg("Top-1 accuracy vs m (n_shot=" + std::to_string(n) + ")",
                                                     "m (selected per class)", {m_curve[n]}));
    files.m_curves.push_back(name);
  }

  std::string md = "# Experiment report\n\nConfig hash: `" + record.config_hash + "`\n\n";
  md += "## Summary\n\n| arm | n_shot | m | seeds | mean top-1 | std top-1 |\n|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    md += "| " + r.arm + " | " + std::to_string(r.n_shot) + " | " + std::to_string(r.m) + " | " + std::to_string(r.seeds) +
          "/" + std::to_string(r.expected_seeds) + " | " + format_stat(r.mean_top1) + " | " + format_stat(r.std_top1) +
          " |\n";
  md += "\n## Accuracy vs n-shot\n\n![accuracy vs n-shot](" + files.n_shot_curve + ")\n\n## Accuracy vs m\n\n";
  if (files.m_curves.empty())
    md += "Omitted: the selection sweep is empty (each n_shot ran a single augmented m).\n";
  else
    for (const auto& f : files.m_curves) md += "![" + f + "](" + f + ")\n\n";

  std::string deltas;
  for (const auto& c : record.cells) {
    if (c.key.arm != "augmented" || !c.ok()) continue;
    const auto* base = record.find({"real-only", c.key.seed, c.key.n_shot, 0});
    if (!base || !base->ok()) continue;
    deltas += "| " + std::to_string(c.key.seed) + " | " + std::to_string(c.key.n_shot) + " | " + std::to_string(c.key.m) +
              " | " + detail::fmt(base->report->top1_accuracy, "%.4f") + " | " +
              detail::fmt(c.report->top1_accuracy, "%.4f") + " | " +
              detail::fmt(c.report->top1_accuracy - base->report->top1_accuracy, "%+.4f") + " |\n";
  }
  if (!deltas.empty())
    md += "\n## Per-seed comparison\n\n| seed | n_shot | m | real-only | augmented | delta |\n|---|---|---|---|---|---|\n" +
          deltas;
  if (!gaps.empty()) {
    md += "\n## Incomplete groups\n\n";
    for (const auto& g : gaps) md += "- " + g + "\n";
  }
  bool any_error = false;
  for (const auto& c : record.cells) {
    if (c.ok()) continue;
    if (!any_error) md += "\n## Failed cells\n\n";
    any_error = true;
    md += "- `" + c.key.id() + "`: " + c.error_kind + ": " + c.error_message + "\n";
  }
  io::write_file_atomic(out / files.markdown, md);
  return files;
}

}  // namespace halluc::harness
