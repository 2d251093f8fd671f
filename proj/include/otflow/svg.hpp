#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace otflow {

// One scatter series: a set of 2-d points drawn with a shared color.
struct ScatterSeries {
  std::string label;
  std::string color;          // any SVG color string, e.g. "#1f77b4"
  double radius = 2.0;        // marker radius in user units
  Eigen::MatrixXd points;     // 2 x n, column per point
};

// Renders the series into a standalone SVG document.  The view box is the
// bounding box of all points padded by a fraction of its diagonal, and the
// y-axis is flipped so that larger ordinates appear higher on screen.
std::string render_scatter_svg(const std::vector<ScatterSeries>& series,
                               double width_px = 480.0,
                               double height_px = 480.0);

// Writes the rendered document to `path`, throwing std::runtime_error on
// failure.
void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterSeries>& series,
                       double width_px = 480.0,
                       double height_px = 480.0);

}  // namespace otflow
