#pragma once

#include <string>
#include <vector>

namespace causalkm::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LogLogChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 640;
  int height = 420;
};

/// Line chart with base-10 logarithmic axes. Points with a nonpositive or
/// non-finite coordinate are dropped.
std::string render_loglog_svg(const LogLogChart& chart);

}  // namespace causalkm::cli
