#pragma once

// Plain-text outputs for the command-line tools: CSV tables at full double
// precision and small SVG line plots. No timestamps or other run-dependent
// content, so reruns are byte-identical.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace delaykern::report {

/// Rows of optional values; a missing value is written as an empty field.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
};

/// 17 significant digits ("%.17g"); non-finite values as nan, inf, -inf.
std::string format_number(double v);

void write_csv(std::ostream& os, const Table& table);

/// One polyline. Non-finite y values break the line into segments.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

void write_svg(std::ostream& os, const Plot& plot);

}  // namespace delaykern::report
