#pragma once

#include <string>
#include <vector>

namespace evtes {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool bars = false;  // draw the first series as a step histogram
};

/// Minimal SVG line plot (axes, ticks, one polyline per series, legend).
std::string svg_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);

/// Joins already formatted fields with commas.
std::string csv_line(const std::vector<std::string>& fields);

/// Writes the file, creating parent directories; throws std::runtime_error.
void write_file(const std::string& path, const std::string& content);

}  // namespace evtes
