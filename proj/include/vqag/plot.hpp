#pragma once

// Minimal static SVG charts for training logs and metric reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vqag/errors.hpp"

namespace vqag {

using Series = std::vector<std::pair<double, double>>;

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return kColors[i % 8];
}

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

}  // namespace detail

/// Line chart; one polyline per named series.
inline std::string svg_line_chart(const std::map<std::string, Series>& series, const std::string& title,
                                  const std::string& x_label = "epoch") {
  using namespace detail;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& [name, pts] : series)
    for (auto [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  require(x0 <= x1, "plot: no finite points to draw");
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv)
      << "</text>\n";
    o << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
      << fmt(xv) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
    << escape_xml(x_label) << "</text>\n";
  std::size_t k = 0;
  for (const auto& [name, pts] : series) {
    o << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << palette(k) << "\" points=\"";
    for (auto [x, y] : pts)
      if (std::isfinite(y)) o << px(x) << ',' << py(y) << ' ';
    o << "\"/>\n";
    double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 28
      << "\" y2=\"" << ly - 4 << "\" stroke-width=\"2\" stroke=\"" << palette(k) << "\"/>\n";
    o << "<text x=\"" << kLeft + pw + 32 << "\" y=\"" << ly << "\">" << escape_xml(name) << "</text>\n";
    ++k;
  }
  o << "</svg>\n";
  return o.str();
}

/// Horizontal bar chart of named values.
inline std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                                 const std::string& title) {
  using namespace detail;
  require(!bars.empty(), "plot: nothing to draw");
  double hi = 0.0, lo = 0.0;
  for (const auto& [n, v] : bars) {
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  if (hi == lo) hi = lo + 1;
  const double row = 22, pw = kWidth - 200 - 80;
  const double height = kTop + row * static_cast<double>(bars.size()) + 20;
  auto px = [&](double v) { return 200 + (v - lo) / (hi - lo) * pw; };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"10\" y=\"24\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& [name, v] = bars[i];
    double y = kTop + row * static_cast<double>(i);
    double a = px(std::min(0.0, v)), b = px(std::max(0.0, v));
    o << "<text x=\"192\" y=\"" << y + 14 << "\" text-anchor=\"end\">" << escape_xml(name) << "</text>\n";
    o << "<rect x=\"" << a << "\" y=\"" << y + 3 << "\" width=\"" << std::max(1.0, b - a)
      << "\" height=\"" << row - 6 << "\" fill=\"" << palette(0) << "\"/>\n";
    o << "<text x=\"" << b + 4 << "\" y=\"" << y + 14 << "\">" << fmt(v) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace vqag
