#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eager/util/errors.hpp"

namespace eager::cli {

struct Series {
  std::string label;
  std::vector<double> x, mean, lo, hi;  // lo/hi empty -> no band
};

// Self-contained learning-curve SVG: axes, mean lines, translucent
// mean +/- std bands, legend. No plotting library involved.
inline void write_curve_svg(const std::string& path, const std::string& title,
                            const std::string& xlabel,
                            const std::string& ylabel,
                            const std::vector<Series>& series) {
  if (series.empty()) throw DataError("nothing to plot");
  const int W = 860, H = 540;
  const double ml = 70, mr = 160, mt = 40, mb = 55;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    const auto& low = s.lo.empty() ? s.mean : s.lo;
    const auto& high = s.hi.empty() ? s.mean : s.hi;
    for (double v : low) ymin = std::min(ymin, v);
    for (double v : high) ymax = std::max(ymax, v);
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
      << "' height='" << H << "' viewBox='0 0 " << W << ' ' << H << "'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << (ml + (W - ml - mr) / 2) << "' y='24' font-size='16' "
         "text-anchor='middle' font-family='sans-serif'>"
      << title << "</text>\n";
  // axes
  svg << "<line x1='" << ml << "' y1='" << (H - mb) << "' x2='" << (W - mr)
      << "' y2='" << (H - mb) << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << (H - mb) << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5;
    const double yv = ymin + (ymax - ymin) * i / 5;
    svg << "<line x1='" << px(xv) << "' y1='" << (H - mb) << "' x2='"
        << px(xv) << "' y2='" << (H - mb + 5) << "' stroke='black'/>\n";
    svg << "<text x='" << px(xv) << "' y='" << (H - mb + 20)
        << "' font-size='11' text-anchor='middle' font-family='sans-serif'>";
    if (xmax >= 1e5)
      svg << std::round(xv / 1e5) / 10.0 << "M";
    else
      svg << std::round(xv);
    svg << "</text>\n";
    svg << "<line x1='" << (ml - 5) << "' y1='" << py(yv) << "' x2='" << ml
        << "' y2='" << py(yv) << "' stroke='black'/>\n";
    svg << "<text x='" << (ml - 9) << "' y='" << (py(yv) + 4)
        << "' font-size='11' text-anchor='end' font-family='sans-serif'>"
        << std::round(yv * 100) / 100 << "</text>\n";
  }
  svg << "<text x='" << (ml + (W - ml - mr) / 2) << "' y='" << (H - 14)
      << "' font-size='13' text-anchor='middle' font-family='sans-serif'>"
      << xlabel << "</text>\n";
  svg << "<text x='18' y='" << (mt + (H - mt - mb) / 2)
      << "' font-size='13' text-anchor='middle' font-family='sans-serif' "
         "transform='rotate(-90 18 "
      << (mt + (H - mt - mb) / 2) << ")'>" << ylabel << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % 6];
    if (!s.lo.empty() && s.lo.size() == s.x.size()) {
      svg << "<polygon fill='" << color << "' fill-opacity='0.18' "
             "stroke='none' points='";
      for (size_t i = 0; i < s.x.size(); ++i)
        svg << px(s.x[i]) << ',' << py(s.hi[i]) << ' ';
      for (size_t i = s.x.size(); i-- > 0;)
        svg << px(s.x[i]) << ',' << py(s.lo[i]) << ' ';
      svg << "'/>\n";
    }
    svg << "<polyline fill='none' stroke='" << color
        << "' stroke-width='1.8' points='";
    for (size_t i = 0; i < s.x.size(); ++i)
      svg << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    svg << "'/>\n";
    const double ly = mt + 18 + 20 * static_cast<double>(si);
    svg << "<line x1='" << (W - mr + 12) << "' y1='" << ly << "' x2='"
        << (W - mr + 40) << "' y2='" << ly << "' stroke='" << color
        << "' stroke-width='3'/>\n";
    svg << "<text x='" << (W - mr + 46) << "' y='" << (ly + 4)
        << "' font-size='12' font-family='sans-serif'>" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw DataError("cannot write plot: " + path);
  out << svg.str();
}

}  // namespace eager::cli
