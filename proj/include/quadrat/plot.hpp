#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "quadrat/projector.hpp"

namespace quadrat {

struct PlotOptions {
  int width = 800;
  int height = 600;
  double point_radius = 4.0;
  std::string title;
};

/// Number of distinct fill colours before the palette repeats.
std::size_t palette_size() noexcept;
const std::string& palette_color(std::size_t category);

/// Standalone SVG scatter of the projection, one colour per category (sorted by name) and a
/// legend. Throws InputError on zero points or misaligned labels.
std::string render_scatter_svg(const Projection& projection, const std::vector<std::string>& labels,
                               const PlotOptions& options = {});
void plot_projection(const Projection& projection, const std::vector<std::string>& labels,
                     const std::filesystem::path& out, const PlotOptions& options = {});

}  // namespace quadrat
