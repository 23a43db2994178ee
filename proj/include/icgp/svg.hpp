#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace icgp::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

// Standalone SVG document. Points that are non-finite (or non-positive on a
// log axis) break the line instead of being drawn.
std::string render(const LinePlot& plot);

struct Heatmap {
  std::string title;
  std::string row_label;
  std::string col_label;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  Eigen::MatrixXd values;
  // Color by log10 of the value.
  bool log_scale = true;
};

std::string render(const Heatmap& map);

// Throws IoError.
void write_file(const std::string& path, const std::string& svg);

}  // namespace icgp::svg
