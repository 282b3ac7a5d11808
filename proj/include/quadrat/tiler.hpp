#pragma once

#include <string_view>
#include <vector>

namespace quadrat {

struct GridSpec {
  int rows = 4;
  int cols = 4;

  int tile_count() const noexcept { return rows * cols; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Parses "RxC" (also accepts "R×C" style with 'X'). Throws InputError.
GridSpec parse_grid(std::string_view text);

/// One grid cell; pixel bounds are half-open [x0, x1) x [y0, y1).
struct TileRect {
  int row = 0;
  int col = 0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  friend bool operator==(const TileRect&, const TileRect&) = default;
};

/// Balanced non-overlapping partition in row-major order. The first `width % cols`
/// columns (and `height % rows` rows) are one pixel larger than the rest.
/// Throws InputError when the image has fewer pixels than grid cells along a side.
std::vector<TileRect> make_grid(int width, int height, GridSpec spec);

}  // namespace quadrat
