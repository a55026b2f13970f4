#include "svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace causalkm::cli {

namespace {

constexpr int kLeft = 78;
constexpr int kRight = 150;
constexpr int kTop = 40;
constexpr int kBottom = 56;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double exponent) {
  const double v = std::pow(10.0, exponent);
  char buf[32];
  if (exponent >= -4 && exponent <= 5) std::snprintf(buf, sizeof buf, "%g", v);
  else std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(exponent));
  return buf;
}

struct Axis {
  double lo = 0.0;  // log10 range, widened to whole decades
  double hi = 1.0;
};

Axis decade_axis(double min_log, double max_log) {
  Axis a{std::floor(min_log), std::ceil(max_log)};
  if (a.hi <= a.lo) a.hi = a.lo + 1.0;
  return a;
}

}  // namespace

std::string render_loglog_svg(const LogLogChart& chart) {
  double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
  std::vector<std::vector<std::pair<double, double>>> kept;
  for (const auto& s : chart.series) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!(s.x[i] > 0) || !(s.y[i] > 0) || !std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double lx = std::log10(s.x[i]), ly = std::log10(s.y[i]);
      pts.emplace_back(lx, ly);
      min_x = std::min(min_x, lx);
      max_x = std::max(max_x, lx);
      min_y = std::min(min_y, ly);
      max_y = std::max(max_y, ly);
    }
    kept.push_back(std::move(pts));
  }
  if (!std::isfinite(min_x)) min_x = max_x = min_y = max_y = 0.0;
  const Axis ax = decade_axis(min_x, max_x);
  const Axis ay = decade_axis(min_y, max_y);

  const double plot_w = chart.width - kLeft - kRight;
  const double plot_h = chart.height - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (lx - ax.lo) / (ax.hi - ax.lo) * plot_w; };
  auto py = [&](double ly) { return kTop + (ay.hi - ly) / (ay.hi - ay.lo) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\""
      << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << chart.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(chart.title) << "</text>\n";

  // Grid and decade ticks.
  for (double e = ax.lo; e <= ax.hi + 1e-9; e += 1.0) {
    svg << "<line x1=\"" << num(px(e)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(e)) << "\" y2=\""
        << num(kTop + plot_h) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(px(e)) << "\" y=\"" << num(kTop + plot_h + 16)
        << "\" text-anchor=\"middle\">" << tick_label(e) << "</text>\n";
    for (int m = 2; m <= 9 && e < ax.hi; ++m) {
      const double lx = e + std::log10(m);
      svg << "<line x1=\"" << num(px(lx)) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(px(lx))
          << "\" y2=\"" << num(kTop + plot_h - 4) << "\" stroke=\"#999\"/>\n";
    }
  }
  for (double e = ay.lo; e <= ay.hi + 1e-9; e += 1.0) {
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(e)) << "\" x2=\"" << num(kLeft + plot_w)
        << "\" y2=\"" << num(py(e)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(e) + 4) << "\" text-anchor=\"end\">"
        << tick_label(e) << "</text>\n";
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << num(plot_w) << "\" height=\""
      << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << chart.height - 14
      << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  svg << "<text transform=\"translate(18," << num(kTop + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    const auto& pts = kept[s];
    if (!pts.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        svg << (i ? " " : "") << num(px(pts[i].first)) << ',' << num(py(pts[i].second));
      svg << "\"/>\n";
      for (const auto& [lx, ly] : pts)
        svg << "<circle cx=\"" << num(px(lx)) << "\" cy=\"" << num(py(ly)) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
    }
    const double ly = kTop + 14 + 20.0 * static_cast<double>(s);
    const double lx = kLeft + plot_w + 14;
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 22) << "\" y2=\""
        << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly + 4) << "\">" << escape(chart.series[s].name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace causalkm::cli
