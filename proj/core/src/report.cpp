#include "cnf/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cnf/csv.hpp"
#include "cnf/errors.hpp"
#include "cnf/features.hpp"
#include "cnf/strfmt.hpp"

#include <filesystem>
#include <fstream>

namespace cnf {

namespace {

constexpr const char* kTrainedFill = "#3b6fb6";
constexpr const char* kTrainedTopFill = "#274b80";
constexpr const char* kRandomFill = "#b8b8b8";
constexpr const char* kComboMfccFill = "#7a4fa3";
constexpr const char* kMfccFill = "#b05c5c";

struct Bar {
  std::string label;
  std::string fill;
  double score = 0.0;
  int rank = 0;  // 0 = unranked
  bool top7 = false;
};

struct MetricBlock {
  std::string metric;
  std::vector<Bar> bars;
};

/// Mean rows keyed by (strategy, source); fold rows ignored here.
std::vector<MetricBlock> build_blocks(const ResultsTable& table) {
  std::set<std::string> metrics;
  for (const auto& r : table.rows)
    if (r.fold == "mean") metrics.insert(r.metric);

  std::vector<MetricBlock> blocks;
  for (const auto& metric : metrics) {
    std::map<std::pair<std::string, std::string>, double> mean_of;
    for (const auto& r : table.rows)
      if (r.fold == "mean" && r.metric == metric) mean_of[{r.strategy, r.source}] = r.score;

    bool any_trained = false, any_random = false;
    for (const auto& [key, score] : mean_of) {
      if (key.second == "trained") any_trained = true;
      if (key.second == "random") any_random = true;
    }
    const std::string primary = any_trained ? "trained" : "random";
    const bool grey_series = any_trained && any_random;

    MetricBlock block;
    block.metric = metric;

    // combo bars in canonical order; rank the primary series
    struct Ranked {
      size_t bar_index;
      double score;
    };
    std::vector<Ranked> primaries;
    for (const auto& combo : all_combos()) {
      std::string name = combo_name(combo);
      auto it = mean_of.find({name, primary});
      if (it != mean_of.end()) {
        block.bars.push_back({name, primary == "trained" ? kTrainedFill : kTrainedFill,
                              it->second, 0, false});
        primaries.push_back({block.bars.size() - 1, it->second});
      }
      if (grey_series) {
        auto rit = mean_of.find({name, "random"});
        if (rit != mean_of.end())
          block.bars.push_back({name, kRandomFill, rit->second, 0, false});
      }
    }
    std::vector<size_t> order(primaries.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return primaries[a].score > primaries[b].score;
    });
    for (size_t pos = 0; pos < order.size(); ++pos) {
      Bar& bar = block.bars[primaries[order[pos]].bar_index];
      bar.rank = int(pos + 1);
      bar.top7 = pos < 7;
      if (bar.top7 && bar.fill == std::string(kTrainedFill)) bar.fill = kTrainedTopFill;
    }

    if (auto it = mean_of.find({"12345+mfcc", "combo+mfcc"}); it != mean_of.end())
      block.bars.push_back({"12345+mfcc", kComboMfccFill, it->second, 0, false});
    if (auto it = mean_of.find({"mfcc", "mfcc"}); it != mean_of.end())
      block.bars.push_back({"mfcc", kMfccFill, it->second, 0, false});

    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace

ResultsTable read_results_csv(const std::string& path) {
  auto rows = csv::read_file(path);
  if (rows.size() < 2) raise(Errc::parse_error, path + ": no result rows");
  const std::vector<std::string> expect = {"strategy", "source", "fold", "metric",
                                           "score",    "kernel", "gamma", "C"};
  if (rows[0] != expect) raise(Errc::parse_error, path + ": unexpected header");
  ResultsTable t;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != expect.size())
      raise(Errc::parse_error, path + ": row " + std::to_string(i) + " field count");
    ResultsTable::Row row;
    row.strategy = r[0];
    row.source = r[1];
    row.fold = r[2];
    row.metric = r[3];
    try {
      row.score = std::stod(r[4]);
    } catch (const std::exception&) {
      raise(Errc::parse_error, path + ": bad score '" + r[4] + "'");
    }
    row.kernel = r[5];
    row.gamma = r[6];
    row.cost = r[7];
    t.rows.push_back(std::move(row));
  }
  return t;
}

void audit_results(const ResultsTable& table) {
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, long>> folds;
  std::map<std::tuple<std::string, std::string, std::string>, double> means;
  for (const auto& r : table.rows) {
    auto key = std::make_tuple(r.strategy, r.source, r.metric);
    if (r.fold == "mean") {
      means[key] = r.score;
    } else {
      folds[key].first += r.score;
      folds[key].second += 1;
    }
  }
  for (const auto& [key, mean] : means) {
    auto it = folds.find(key);
    if (it == folds.end() || it->second.second == 0)
      raise(Errc::invalid_argument, "mean row without fold rows: " + std::get<0>(key));
    double recomputed = it->second.first / double(it->second.second);
    if (std::abs(recomputed - mean) > 2e-6)
      raise(Errc::invalid_argument,
            "mean row inconsistent with fold rows for " + std::get<0>(key) + "/" +
                std::get<1>(key) + "/" + std::get<2>(key) + ": " + fmt_g(mean) + " vs " +
                fmt_g(recomputed));
  }
  for (const auto& [key, acc] : folds) {
    if (!means.count(key))
      raise(Errc::invalid_argument, "fold rows without a mean row: " + std::get<0>(key));
  }
}

std::string render_report_svg(const ResultsTable& table) {
  auto blocks = build_blocks(table);
  if (blocks.empty()) raise(Errc::invalid_argument, "no mean rows to plot");

  const double bar_w = 16.0, gap = 4.0, left = 48.0, right = 16.0;
  const double block_h = 300.0, plot_h = 220.0, top_pad = 28.0;

  size_t max_bars = 0;
  for (const auto& b : blocks) max_bars = std::max(max_bars, b.bars.size());
  const double width = left + right + double(max_bars) * (bar_w + gap);
  const double height = block_h * double(blocks.size());

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_f(width, 0) +
         "\" height=\"" + fmt_f(height, 0) + "\" viewBox=\"0 0 " + fmt_f(width, 0) + " " +
         fmt_f(height, 0) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& block = blocks[bi];
    const double oy = double(bi) * block_h;

    double lo = 0.0, hi = 1.0;
    for (const auto& bar : block.bars) {
      lo = std::min(lo, bar.score);
      hi = std::max(hi, bar.score);
    }
    auto ypix = [&](double v) {
      return oy + top_pad + plot_h - (v - lo) / (hi - lo) * plot_h;
    };

    svg += "<text x=\"" + fmt_f(left, 2) + "\" y=\"" + fmt_f(oy + 18.0, 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#000000\">" + block.metric +
           "</text>\n";

    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      if (tick < lo || tick > hi) continue;
      double y = ypix(tick);
      svg += "<line x1=\"" + fmt_f(left, 2) + "\" y1=\"" + fmt_f(y, 2) + "\" x2=\"" +
             fmt_f(width - right, 2) + "\" y2=\"" + fmt_f(y, 2) +
             "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      svg += "<text x=\"" + fmt_f(left - 6.0, 2) + "\" y=\"" + fmt_f(y + 4.0, 2) +
             "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" "
             "fill=\"#444444\">" +
             fmt_f(tick, 2) + "</text>\n";
    }

    for (size_t i = 0; i < block.bars.size(); ++i) {
      const Bar& bar = block.bars[i];
      const double x = left + double(i) * (bar_w + gap);
      const double y0 = ypix(std::max(0.0, bar.score));
      const double y_base = ypix(std::max(0.0, lo) == 0.0 ? 0.0 : lo);
      double y = std::min(y0, y_base);
      double h = std::abs(y_base - y0);
      if (h < 0.5) h = 0.5;
      svg += "<rect x=\"" + fmt_f(x, 2) + "\" y=\"" + fmt_f(y, 2) + "\" width=\"" +
             fmt_f(bar_w, 2) + "\" height=\"" + fmt_f(h, 2) + "\" fill=\"" + bar.fill + "\"/>\n";
      if (bar.rank > 0) {
        svg += "<text x=\"" + fmt_f(x + bar_w / 2.0, 2) + "\" y=\"" + fmt_f(y + 12.0, 2) +
               "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\" "
               "fill=\"#ffffff\">" +
               std::to_string(bar.rank) + "</text>\n";
      }
      // strategy label, rotated under the bar
      const double lx = x + bar_w / 2.0 + 3.0;
      const double ly = oy + top_pad + plot_h + 8.0;
      svg += "<text x=\"" + fmt_f(lx, 2) + "\" y=\"" + fmt_f(ly, 2) +
             "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#000000\" transform=\"rotate(90 " +
             fmt_f(lx, 2) + " " + fmt_f(ly, 2) + ")\">" + bar.label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_summary_markdown(const ResultsTable& table) {
  auto blocks = build_blocks(table);
  std::string md = "# Strategy report\n\n";
  for (const auto& block : blocks) {
    md += "## " + block.metric + "\n\n| strategy | series | score | rank |\n|---|---|---|---|\n";
    for (const auto& bar : block.bars) {
      std::string series = bar.fill == std::string(kRandomFill) ? "random"
                           : bar.label == "mfcc"                ? "mfcc"
                           : bar.label == "12345+mfcc"          ? "combo+mfcc"
                                                                : "convnet";
      md += "| " + bar.label + " | " + series + " | " + fmt_f(bar.score, 4) + " | " +
            (bar.rank > 0 ? std::to_string(bar.rank) : "-") + " |\n";
    }
    md += "\n";
  }
  return md;
}

int run_report(const std::string& results_csv, const std::string& out_svg,
               const std::string& out_md) {
  ResultsTable table = read_results_csv(results_csv);
  audit_results(table);

  auto write = [](const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io, "cannot write " + path);
    out << content;
    if (!out) raise(Errc::io, "write failed: " + path);
  };
  write(out_svg, render_report_svg(table));
  write(out_md, render_summary_markdown(table));
  std::printf("wrote %s and %s\n", out_svg.c_str(), out_md.c_str());
  return 0;
}

}  // namespace cnf
