#pragma once

#include <string>
#include <vector>

namespace bulkalloc {

// One labelled polyline. NaN y-values break the line but keep the series.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Writes a standalone SVG line chart: axes with 5 ticks per side, point
// markers, and a legend. Purely a convenience view over the results CSV.
// Throws IoError (see experiment.hpp) when the file cannot be written.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

}  // namespace bulkalloc
