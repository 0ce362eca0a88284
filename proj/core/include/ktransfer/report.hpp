#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ktransfer/eval.hpp"

namespace ktransfer {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
};

std::string format_number(double v, int decimals = 2);

void write_csv(std::ostream& out, const Table& table);
void write_text(std::ostream& out, const Table& table);  // aligned columns
Table read_csv_table(const std::filesystem::path& path);

// Long-format result tables; these are the CSVs the CLI writes and `report` reads.
Table reference_long(const std::vector<MetricReport>& reports);
Table naive_long(const NaiveTransferResult& result);
Table pairwise_long(const PairwiseResult& result);
Table curve_long(const std::vector<CurvePoint>& points);

std::vector<CurvePoint> curve_from_long(const Table& table);

// Pivoted, human-readable layouts. Metrics are shown in percent.
Table reference_grid(const Table& long_table);          // model x course (ACC, AUC)
Table naive_grid(const Table& long_table);              // model x target (ACC, AUC) + average
Table pairwise_grid(const Table& long_table, const std::string& metric);  // source x target
Table curve_grid(const std::vector<CurveSummary>& summary, const std::string& course, const std::string& metric);

// Plain SVG line chart, one polyline per series. x values index into x_ticks.
struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<std::string>& x_ticks, const std::vector<Series>& series);

// One ACC and one AUC chart per course; returns the files written.
std::vector<std::filesystem::path> render_curve_charts(const std::vector<CurveSummary>& summary,
                                                       const std::filesystem::path& out_dir);

}  // namespace ktransfer
