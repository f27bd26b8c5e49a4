// SPDX-License-Identifier: Apache-2.0
//
// Rendering of evaluation results: the method comparison table, sum-rate
// tables, and static SVG plots backed by CSV data files.

#pragma once

#include <string>
#include <vector>

#include "cfx/eval.hpp"
#include "cfx/sumrate.hpp"

namespace cfx::report {

// Canonical comparison-table rows, in render order. Methods without results
// (the adversarial baseline is out of scope) render as "n/a".
const std::vector<std::string> &method_rows();

std::string format_eval_csv(const std::vector<eval::EvalReport> &rows);
std::string format_eval_text(const std::vector<eval::EvalReport> &rows);
std::string format_sumrate_csv(const eval::SumRateStudy &study);
std::string format_sumrate_text(const eval::SumRateStudy &study);

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

// Minimal self-contained SVG line chart; series are drawn in palette order
// with a legend, shared axes, and numeric tick labels.
std::string render_line_plot(const std::string &title, const std::string &x_label,
                             const std::string &y_label, const std::vector<PlotSeries> &series);

// Per-command output writers (CSV plus text table plus plot where sensible).
void write_eval_outputs(const std::string &dir, const std::vector<eval::EvalReport> &rows);
void write_sumrate_outputs(const std::string &dir, const eval::SumRateStudy &study);

// Scans a directory tree for eval_report.csv / sumrate.csv / loss_log.csv
// files and renders combined comparison tables and plots into out_dir.
// Throws IoError when the tree contains no run outputs at all.
void render_report(const std::string &runs_root, const std::string &out_dir);

} // namespace cfx::report
