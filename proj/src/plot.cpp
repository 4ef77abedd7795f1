#include "bulkalloc/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bulkalloc/experiment.hpp"

namespace bulkalloc {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Range {
  double lo = 0.0, hi = 1.0;
  void widen(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

Range fit(const std::vector<PlotSeries>& series, bool x_axis) {
  Range r{std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (const PlotSeries& s : series) {
    for (double v : (x_axis ? s.x : s.y)) r.widen(v);
  }
  if (r.lo > r.hi) return {0.0, 1.0};  // nothing finite to plot
  if (r.lo == r.hi) {
    const double pad = (r.lo == 0.0) ? 1.0 : std::abs(r.lo) * 0.5;
    return {r.lo - pad, r.hi + pad};
  }
  const double pad = (r.hi - r.lo) * 0.05;
  return {r.lo - pad, r.hi + pad};
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  const Range xr = fit(series, true);
  const Range yr = fit(series, false);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto sx = [&](double v) {
    return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w;
  };
  const auto sy = [&](double v) {
    return kTop + plot_h - (v - yr.lo) / (yr.hi - yr.lo) * plot_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
         "font-size=\"15\">" << esc(title) << "</text>\n";

  // frame + ticks
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    const double px = sx(fx), py = sy(fy);
    svg << "<line x1=\"" << px << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << px
        << "\" y2=\"" << kTop + plot_h + 5 << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << px << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << format_number(fx)
        << "</text>\n"
        << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py << "\" x2=\"" << kLeft
        << "\" y2=\"" << py << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << format_number(fy)
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << esc(x_label)
      << "</text>\n"
      << "<text x=\"16\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kTop + plot_h / 2 << ")\">" << esc(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(*kPalette))];
    std::string points;
    bool open = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        if (open) {
          svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\""
              << color << "\" stroke-width=\"1.5\"/>\n";
          points.clear();
          open = false;
        }
        continue;
      }
      points += format_number(sx(s.x[i])) + "," + format_number(sy(s.y[i])) + " ";
      open = true;
      svg << "<circle cx=\"" << format_number(sx(s.x[i])) << "\" cy=\""
          << format_number(sy(s.y[i])) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    if (open) {
      svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\""
          << color << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 14 + 16 * static_cast<double>(si);
    svg << "<line x1=\"" << kLeft + plot_w - 130 << "\" y1=\"" << ly - 4
        << "\" x2=\"" << kLeft + plot_w - 110 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + plot_w - 104 << "\" y=\"" << ly
        << "\" font-size=\"11\">" << esc(s.label) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write plot: " + path);
  out << svg.str();
  if (!out) throw IoError("plot write failed: " + path);
}

}  // namespace bulkalloc
