#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vcube/geo.hpp"

namespace vcube {

inline constexpr float kDefaultNodata = -9999.0f;

// Single-band, row-major grid of 32-bit float samples with georeferencing.
// Samples are either finite or exactly the nodata sentinel; NaN never appears
// in a stored raster. The CRS is an opaque label: operations require label
// equality and never reproject.
struct Raster {
  uint32_t width = 0;
  uint32_t height = 0;
  GeoTransform transform;
  float nodata = kDefaultNodata;
  std::string crs;
  std::vector<float> samples;

  static Raster filled(uint32_t width, uint32_t height, const GeoTransform& t,
                       std::string crs, float value, float nodata = kDefaultNodata);

  size_t index(uint32_t col, uint32_t row) const { return size_t(row) * width + col; }
  float at(uint32_t col, uint32_t row) const { return samples[index(col, row)]; }
  float& at(uint32_t col, uint32_t row) { return samples[index(col, row)]; }

  // Sentinel comparison is on the bit pattern, not float equality.
  bool is_nodata(float v) const;

  bool same_grid(const Raster& other) const {
    return width == other.width && height == other.height &&
           transform == other.transform && crs == other.crs;
  }

  BBox extent() const;

  PixelWindow full_window() const { return {0, 0, width, height}; }
};

// Bit-level equality: every header field plus the exact bit pattern of every
// sample (so it distinguishes 0.0 from -0.0 and different nodata encodings).
bool bitwise_equal(const Raster& a, const Raster& b);

// Geotransform of a sub-window of a grid.
GeoTransform window_transform(const GeoTransform& t, const PixelWindow& w);

// Minimal pixel-aligned sub-raster covering bbox ∩ extent. Throws NoOverlap
// when the intersection is empty.
Raster crop(const Raster& r, const BBox& b);

// Pixel window covering bbox ∩ grid extent, same rule as crop().
PixelWindow crop_window(uint32_t width, uint32_t height, const GeoTransform& t,
                        const BBox& b);

// Disjoint 256x256 windows covering every pixel exactly once, row-major.
// Edge tiles are partial.
std::vector<std::pair<TileId, PixelWindow>> tile_grid(uint32_t width, uint32_t height);
std::vector<std::pair<TileId, PixelWindow>> tile_grid(const Raster& r);

PixelWindow tile_window(uint32_t width, uint32_t height, TileId id);

// Copies src into a fresh raster restricted to `w`, which must lie inside r.
Raster extract(const Raster& r, const PixelWindow& w);

// Copies the overlap of src_pos and dst_pos (coordinates of both rasters in a
// shared grid space) from src into dst. No-op when they don't overlap.
void blit(const Raster& src, const PixelWindow& src_pos, Raster& dst,
          const PixelWindow& dst_pos);

// --- VRAS on-disk format (little-endian, bit-exact) ------------------------
//
//   magic "VRAS1"
//   u32 width, u32 height
//   f64 origin_x, f64 origin_y, f64 pixel_w, f64 pixel_h
//   f32 nodata
//   u16 crs_label_len, crs_label bytes
//   width*height f32 samples, row-major, row 0 = top

struct VrasHeader {
  uint32_t width = 0;
  uint32_t height = 0;
  GeoTransform transform;
  float nodata = kDefaultNodata;
  std::string crs;
  uint64_t payload_offset = 0;  // byte offset of the first sample

  uint64_t header_bytes() const { return payload_offset; }
  uint64_t payload_bytes() const { return uint64_t(width) * height * 4; }
};

// In-memory forms, useful when the encoded bytes are hashed before hitting
// disk (content-addressed cache entries).
std::string encode_vras(const Raster& r);
Raster decode_vras(const std::string& bytes);

void write_vras(const Raster& r, const std::filesystem::path& path);
Raster read_vras(const std::filesystem::path& path);
VrasHeader read_vras_header(const std::filesystem::path& path);

// Reads exactly the requested pixel window via per-row seeks, touching only
// header + window payload bytes. The window must lie within the file's grid.
Raster read_vras_window(const std::filesystem::path& path, const PixelWindow& w);

}  // namespace vcube
