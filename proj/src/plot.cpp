#include "quadrat/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "quadrat/csv.hpp"
#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

const std::array<std::string, 20> kPalette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#e7ba52", "#637939", "#ad494a",
    "#7b4173", "#3182bd", "#f768a1", "#31a354", "#636363", "#fd8d3c"};

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

std::string num(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

std::size_t palette_size() noexcept { return kPalette.size(); }

const std::string& palette_color(std::size_t category) { return kPalette[category % kPalette.size()]; }

std::string render_scatter_svg(const Projection& projection, const std::vector<std::string>& labels,
                               const PlotOptions& options) {
  const auto n = static_cast<std::size_t>(projection.points.rows());
  if (n == 0) throw InputError("plot: no points");
  if (projection.points.cols() != 2) throw InputError("plot: projection must be 2-D");
  if (labels.size() != n) {
    throw InputError("plot: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " points");
  }
  if (!projection.points.allFinite()) throw InputError("plot: non-finite coordinates");

  std::map<std::string, std::size_t> category;
  for (const auto& l : labels) category.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [name, id] : category) id = next++;

  double x_min = projection.points.col(0).minCoeff(), x_max = projection.points.col(0).maxCoeff();
  double y_min = projection.points.col(1).minCoeff(), y_max = projection.points.col(1).maxCoeff();
  auto pad = [](double& lo, double& hi) {
    double span = hi - lo;
    if (!(span > 0.0)) span = std::max(1.0, std::abs(lo));
    const double centre = 0.5 * (lo + hi);
    lo = centre - 0.55 * span;
    hi = centre + 0.55 * span;
  };
  pad(x_min, x_max);
  pad(y_min, y_max);

  const double legend_width = 180.0;
  const double plot_w = std::max(10.0, options.width - legend_width);
  const double plot_h = options.height;
  auto sx = [&](double x) { return (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << " " << options.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<title>" << xml_escape(options.title) << "</title>\n";
  }
  svg << "<g class=\"points\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    svg << "<circle cx=\"" << num(sx(projection.points(r, 0))) << "\" cy=\"" << num(sy(projection.points(r, 1)))
        << "\" r=\"" << num(options.point_radius) << "\" fill=\"" << palette_color(category.at(labels[i]))
        << "\" fill-opacity=\"0.8\"/>\n";
  }
  svg << "</g>\n<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double y = 20.0;
  for (const auto& [name, id] : category) {
    svg << "<g class=\"legend-entry\"><rect x=\"" << num(plot_w + 10) << "\" y=\"" << num(y - 10)
        << "\" width=\"12\" height=\"12\" fill=\"" << palette_color(id) << "\"/><text x=\"" << num(plot_w + 28)
        << "\" y=\"" << num(y) << "\">" << xml_escape(name) << "</text></g>\n";
    y += 18.0;
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void plot_projection(const Projection& projection, const std::vector<std::string>& labels,
                     const std::filesystem::path& out, const PlotOptions& options) {
  csv::write_text(out, render_scatter_svg(projection, labels, options));
}

}  // namespace quadrat
