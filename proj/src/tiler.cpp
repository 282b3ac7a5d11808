#include "quadrat/tiler.hpp"

#include <charconv>
#include <string>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

int parse_positive(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) {
    throw InputError("invalid grid '" + std::string(whole) + "', expected RxC");
  }
  return v;
}

// Start offset of segment `i` when `length` pixels are split into `parts` balanced segments.
int segment_start(int length, int parts, int i) {
  const int base = length / parts;
  const int extra = length % parts;
  return i * base + (i < extra ? i : extra);
}

}  // namespace

GridSpec parse_grid(std::string_view text) {
  const auto sep = text.find_first_of("xX");
  if (sep == std::string_view::npos) {
    throw InputError("invalid grid '" + std::string(text) + "', expected RxC");
  }
  return GridSpec{parse_positive(text.substr(0, sep), text), parse_positive(text.substr(sep + 1), text)};
}

std::vector<TileRect> make_grid(int width, int height, GridSpec spec) {
  if (spec.rows < 1 || spec.cols < 1) throw InputError("grid dimensions must be positive");
  if (width < spec.cols || height < spec.rows) {
    throw InputError("image " + std::to_string(width) + "x" + std::to_string(height) +
                     " is too small for a " + std::to_string(spec.rows) + "x" +
                     std::to_string(spec.cols) + " grid");
  }
  std::vector<TileRect> tiles;
  tiles.reserve(static_cast<std::size_t>(spec.tile_count()));
  for (int r = 0; r < spec.rows; ++r) {
    const int y0 = segment_start(height, spec.rows, r);
    const int y1 = segment_start(height, spec.rows, r + 1);
    for (int c = 0; c < spec.cols; ++c) {
      tiles.push_back(TileRect{r, c, segment_start(width, spec.cols, c), y0,
                               segment_start(width, spec.cols, c + 1), y1});
    }
  }
  return tiles;
}

}  // namespace quadrat
