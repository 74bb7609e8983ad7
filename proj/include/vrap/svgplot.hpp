#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vrap/types.hpp"

namespace vrap {

// Minimal SVG line plots. Decoration only: every number that appears in a
// plot also lives in the machine-readable results table.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<PlotSeries>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const int width = 640, height = 440;
  const int left = 70, right = 30, top = 50, bottom = 60;

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const PlotSeries& s : series)
    for (std::size_t n = 0; n < s.x.size(); ++n) {
      x_min = std::min(x_min, s.x[n]);
      x_max = std::max(x_max, s.x[n]);
      y_min = std::min(y_min, s.y[n]);
      y_max = std::max(y_max, s.y[n]);
    }
  if (x_min > x_max) {
    x_min = 0;
    x_max = 1;
  }
  if (y_min > y_max) {
    y_min = 0;
    y_max = 1;
  }
  if (x_max - x_min < 1e-12) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_max - y_min < 1e-12) {
    y_min -= 0.05;
    y_max += 0.05;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const auto px = [&](double x) {
    return left + (x - x_min) / (x_max - x_min) * (width - left - right);
  };
  const auto py = [&](double y) {
    return height - bottom - (y - y_min) / (y_max - y_min) * (height - top - bottom);
  };

  namespace fs = std::filesystem;
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("cannot open plot file for writing: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << width / 2 << "' y='24' text-anchor='middle' "
      << "font-family='sans-serif' font-size='15'>" << title << "</text>\n";

  // axes
  out << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='"
      << height - bottom << "' stroke='black'/>\n"
      << "<line x1='" << left << "' y1='" << height - bottom << "' x2='"
      << width - right << "' y2='" << height - bottom << "' stroke='black'/>\n";
  char buffer[64];
  for (int tick = 0; tick <= 4; ++tick) {
    const double ty = y_min + (y_max - y_min) * tick / 4.0;
    const double tx = x_min + (x_max - x_min) * tick / 4.0;
    std::snprintf(buffer, sizeof(buffer), "%.3g", ty);
    out << "<text x='" << left - 8 << "' y='" << py(ty) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
        << buffer << "</text>\n"
        << "<line x1='" << left - 4 << "' y1='" << py(ty) << "' x2='" << left
        << "' y2='" << py(ty) << "' stroke='black'/>\n";
    std::snprintf(buffer, sizeof(buffer), "%.3g", tx);
    out << "<text x='" << px(tx) << "' y='" << height - bottom + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>"
        << buffer << "</text>\n"
        << "<line x1='" << px(tx) << "' y1='" << height - bottom << "' x2='"
        << px(tx) << "' y2='" << height - bottom + 4 << "' stroke='black'/>\n";
  }
  out << "<text x='" << (left + width - right) / 2 << "' y='" << height - 16
      << "' text-anchor='middle' font-family='sans-serif' font-size='13'>"
      << x_label << "</text>\n"
      << "<text x='18' y='" << (top + height - bottom) / 2
      << "' text-anchor='middle' font-family='sans-serif' font-size='13' "
      << "transform='rotate(-90 18 " << (top + height - bottom) / 2 << ")'>"
      << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (std::size_t n = 0; n < series[s].x.size(); ++n)
      out << px(series[s].x[n]) << "," << py(series[s].y[n]) << " ";
    out << "'/>\n";
    for (std::size_t n = 0; n < series[s].x.size(); ++n)
      out << "<circle cx='" << px(series[s].x[n]) << "' cy='" << py(series[s].y[n])
          << "' r='3' fill='" << color << "'/>\n";
    out << "<text x='" << width - right - 150 << "' y='" << top + 16 * s + 4
        << "' font-family='sans-serif' font-size='12' fill='" << color << "'>"
        << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw Error("failed writing plot file: " + path);
}

}  // namespace vrap
