#include "otflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace otflow {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_scatter_svg(const std::vector<ScatterSeries>& series,
                               double width_px, double height_px) {
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin, ymin = xmin, ymax = -xmin;
  long total = 0;
  for (const auto& s : series) {
    if (s.points.rows() != 2 && s.points.cols() > 0)
      throw std::invalid_argument("scatter series must hold 2-d points");
    for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
      xmin = std::min(xmin, s.points(0, c));
      xmax = std::max(xmax, s.points(0, c));
      ymin = std::min(ymin, s.points(1, c));
      ymax = std::max(ymax, s.points(1, c));
      ++total;
    }
  }
  if (total == 0) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  double dx = xmax - xmin, dy = ymax - ymin;
  double pad = 0.05 * std::max(std::hypot(dx, dy), 1e-12);
  xmin -= pad;
  xmax += pad;
  ymin -= pad;
  ymax += pad;
  dx = xmax - xmin;
  dy = ymax - ymin;

  const double sx = width_px / dx;
  const double sy = height_px / dy;
  auto px = [&](double x) { return (x - xmin) * sx; };
  auto py = [&](double y) { return (ymax - y) * sy; };  // flip y

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width_px)
      << "\" height=\"" << fmt(height_px) << "\" viewBox=\"0 0 "
      << fmt(width_px) << " " << fmt(height_px) << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double legend_y = 16.0;
  for (const auto& s : series) {
    out << "  <g fill=\"" << escape_xml(s.color) << "\" fill-opacity=\"0.75\">\n";
    for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
      out << "    <circle cx=\"" << fmt(px(s.points(0, c))) << "\" cy=\""
          << fmt(py(s.points(1, c))) << "\" r=\"" << fmt(s.radius) << "\"/>\n";
    }
    out << "  </g>\n";
    if (!s.label.empty()) {
      out << "  <circle cx=\"12\" cy=\"" << fmt(legend_y - 4.0) << "\" r=\"4\" fill=\""
          << escape_xml(s.color) << "\"/>\n";
      out << "  <text x=\"22\" y=\"" << fmt(legend_y)
          << "\" font-family=\"sans-serif\" font-size=\"12\">"
          << escape_xml(s.label) << "</text>\n";
      legend_y += 16.0;
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterSeries>& series,
                       double width_px, double height_px) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << render_scatter_svg(series, width_px, height_px);
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace otflow
