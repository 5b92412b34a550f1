#pragma once

#include <string>
#include <vector>

namespace cnf {

/// Parsed results.csv (schema: strategy,source,fold,metric,score,kernel,gamma,C).
struct ResultsTable {
  struct Row {
    std::string strategy, source, fold, metric;
    double score = 0.0;
    std::string kernel, gamma, cost;
  };
  std::vector<Row> rows;
};

ResultsTable read_results_csv(const std::string& path);

/// Audit: every "mean" row must equal the mean of its fold rows (within
/// print rounding). Raises invalid_argument on a mismatch.
void audit_results(const ResultsTable& table);

/// Bar chart in the style of the per-task figures: one bar per strategy in
/// canonical combo order, random-model bars in grey next to their trained
/// counterparts, baselines on the right, ranks annotated inside the primary
/// bars. One chart block per metric. Deterministic bytes for fixed input.
std::string render_report_svg(const ResultsTable& table);

std::string render_summary_markdown(const ResultsTable& table);

int run_report(const std::string& results_csv, const std::string& out_svg,
               const std::string& out_md);

}  // namespace cnf
