#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace vcube {

// Planning, computation and caching all happen on fixed 256x256 pixel tiles.
inline constexpr uint32_t kTileSize = 256;

// North-up, axis-aligned affine mapping between pixel indices and map
// coordinates. pixel_h is a positive magnitude applied downward: row 0 is the
// northernmost row.
struct GeoTransform {
  double origin_x = 0.0;  // easting of the upper-left corner
  double origin_y = 0.0;  // northing of the upper-left corner
  double pixel_w = 1.0;   // map units per pixel, > 0
  double pixel_h = 1.0;   // map units per pixel, > 0, downward

  bool operator==(const GeoTransform&) const = default;
};

struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool valid() const { return min_x < max_x && min_y < max_y; }

  bool operator==(const BBox&) const = default;
};

// Positive-area overlap; boxes that merely touch do not intersect.
inline bool intersects(const BBox& a, const BBox& b) {
  return std::max(a.min_x, b.min_x) < std::min(a.max_x, b.max_x) &&
         std::max(a.min_y, b.min_y) < std::min(a.max_y, b.max_y);
}

struct TileId {
  uint32_t col = 0;
  uint32_t row = 0;

  bool operator==(const TileId&) const = default;
  auto operator<=>(const TileId&) const = default;
};

// Rectangular pixel region. Offsets are signed so that window arithmetic
// (halo expansion, inverse transforms) can go out of bounds before clamping.
struct PixelWindow {
  int64_t col0 = 0;
  int64_t row0 = 0;
  uint32_t width = 0;
  uint32_t height = 0;

  int64_t col_end() const { return col0 + width; }
  int64_t row_end() const { return row0 + height; }
  uint64_t pixel_count() const { return uint64_t(width) * height; }
  bool empty() const { return width == 0 || height == 0; }

  bool contains(int64_t col, int64_t row) const {
    return col >= col0 && col < col_end() && row >= row0 && row < row_end();
  }

  bool operator==(const PixelWindow&) const = default;
};

inline PixelWindow window_intersection(const PixelWindow& a, const PixelWindow& b) {
  int64_t c0 = std::max(a.col0, b.col0);
  int64_t r0 = std::max(a.row0, b.row0);
  int64_t c1 = std::min(a.col_end(), b.col_end());
  int64_t r1 = std::min(a.row_end(), b.row_end());
  if (c1 <= c0 || r1 <= r0) return PixelWindow{c0, r0, 0, 0};
  return PixelWindow{c0, r0, uint32_t(c1 - c0), uint32_t(r1 - r0)};
}

// Center of pixel (col, row).
inline std::pair<double, double> pixel_to_map(const GeoTransform& t, int64_t col,
                                              int64_t row) {
  return {t.origin_x + (double(col) + 0.5) * t.pixel_w,
          t.origin_y - (double(row) + 0.5) * t.pixel_h};
}

// Floor-based inverse: a point exactly on a pixel's left/top edge belongs to
// that pixel. May return out-of-range indices; callers clamp.
inline std::pair<int64_t, int64_t> map_to_pixel(const GeoTransform& t, double x,
                                                double y) {
  return {int64_t(std::floor((x - t.origin_x) / t.pixel_w)),
          int64_t(std::floor((t.origin_y - y) / t.pixel_h))};
}

}  // namespace vcube
