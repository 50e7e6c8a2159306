#include "vcube/raster.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vcube/error.hpp"

namespace vcube {

namespace {

constexpr char kMagic[5] = {'V', 'R', 'A', 'S', '1'};

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

void put_u16(std::string& out, uint16_t v) {
  char b[2] = {char(v & 0xff), char(v >> 8)};
  put_bytes(out, b, 2);
}

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  put_bytes(out, b, 4);
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  put_bytes(out, b, 8);
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* p, size_t n) {
    in_.read(reinterpret_cast<char*>(p), std::streamsize(n));
    if (in_.gcount() != std::streamsize(n))
      throw Error(ErrorCode::MalformedFile, "truncated file");
    offset_ += n;
  }

  uint16_t u16() {
    unsigned char b[2];
    bytes(b, 2);
    return uint16_t(b[0] | (b[1] << 8));
  }

  uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  }

  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  uint64_t offset() const { return offset_; }

 private:
  std::istream& in_;
  uint64_t offset_ = 0;
};

VrasHeader parse_header(Reader& r) {
  char magic[5];
  r.bytes(magic, 5);
  if (std::memcmp(magic, kMagic, 5) != 0)
    throw Error(ErrorCode::MalformedFile, "bad magic");

  VrasHeader h;
  h.width = r.u32();
  h.height = r.u32();
  h.transform.origin_x = r.f64();
  h.transform.origin_y = r.f64();
  h.transform.pixel_w = r.f64();
  h.transform.pixel_h = r.f64();
  h.nodata = r.f32();
  uint16_t crs_len = r.u16();
  h.crs.resize(crs_len);
  if (crs_len > 0) r.bytes(h.crs.data(), crs_len);
  h.payload_offset = r.offset();

  if (h.width == 0 || h.height == 0)
    throw Error(ErrorCode::MalformedFile, "zero raster dimension");
  if (!(h.transform.pixel_w > 0) || !(h.transform.pixel_h > 0))
    throw Error(ErrorCode::MalformedFile, "non-positive pixel size (north-up only)");
  if (!std::isfinite(h.transform.origin_x) || !std::isfinite(h.transform.origin_y))
    throw Error(ErrorCode::MalformedFile, "non-finite origin");
  if (!std::isfinite(h.nodata))
    throw Error(ErrorCode::MalformedFile, "non-finite nodata sentinel");
  return h;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

float sanitize(float v, float nodata) { return std::isfinite(v) ? v : nodata; }

Raster read_vras_stream(std::istream& in) {
  Reader rd(in);
  VrasHeader h = parse_header(rd);

  Raster r;
  r.width = h.width;
  r.height = h.height;
  r.transform = h.transform;
  r.nodata = h.nodata;
  r.crs = h.crs;
  r.samples.resize(size_t(h.width) * h.height);
  rd.bytes(r.samples.data(), r.samples.size() * 4);

  // Exactly the promised payload, nothing after it.
  if (in.peek() != std::istream::traits_type::eof())
    throw Error(ErrorCode::MalformedFile, "trailing bytes after payload");

  for (float& v : r.samples) v = sanitize(v, r.nodata);
  return r;
}

}  // namespace

Raster Raster::filled(uint32_t width, uint32_t height, const GeoTransform& t,
                      std::string crs, float value, float nodata) {
  Raster r;
  r.width = width;
  r.height = height;
  r.transform = t;
  r.nodata = nodata;
  r.crs = std::move(crs);
  r.samples.assign(size_t(width) * height, value);
  return r;
}

bool Raster::is_nodata(float v) const {
  return std::bit_cast<uint32_t>(v) == std::bit_cast<uint32_t>(nodata);
}

BBox Raster::extent() const {
  return BBox{transform.origin_x,
              transform.origin_y - double(height) * transform.pixel_h,
              transform.origin_x + double(width) * transform.pixel_w,
              transform.origin_y};
}

bool bitwise_equal(const Raster& a, const Raster& b) {
  if (a.width != b.width || a.height != b.height || a.transform != b.transform ||
      std::bit_cast<uint32_t>(a.nodata) != std::bit_cast<uint32_t>(b.nodata) ||
      a.crs != b.crs || a.samples.size() != b.samples.size())
    return false;
  return a.samples.empty() ||
         std::memcmp(a.samples.data(), b.samples.data(),
                     a.samples.size() * sizeof(float)) == 0;
}

GeoTransform window_transform(const GeoTransform& t, const PixelWindow& w) {
  GeoTransform out = t;
  out.origin_x = t.origin_x + double(w.col0) * t.pixel_w;
  out.origin_y = t.origin_y - double(w.row0) * t.pixel_h;
  return out;
}

PixelWindow crop_window(uint32_t width, uint32_t height, const GeoTransform& t,
                        const BBox& b) {
  BBox ext{t.origin_x, t.origin_y - double(height) * t.pixel_h,
           t.origin_x + double(width) * t.pixel_w, t.origin_y};
  if (!intersects(b, ext))
    throw Error(ErrorCode::NoOverlap, "bbox does not overlap raster extent");

  double ix0 = std::max(b.min_x, ext.min_x);
  double ix1 = std::min(b.max_x, ext.max_x);
  double iy0 = std::max(b.min_y, ext.min_y);
  double iy1 = std::min(b.max_y, ext.max_y);

  // First and last pixel whose cell positively overlaps the intersection.
  int64_t c0 = int64_t(std::floor((ix0 - t.origin_x) / t.pixel_w));
  int64_t c1 = int64_t(std::ceil((ix1 - t.origin_x) / t.pixel_w)) - 1;
  int64_t r0 = int64_t(std::floor((t.origin_y - iy1) / t.pixel_h));
  int64_t r1 = int64_t(std::ceil((t.origin_y - iy0) / t.pixel_h)) - 1;

  c0 = std::clamp<int64_t>(c0, 0, width - 1);
  c1 = std::clamp<int64_t>(c1, 0, width - 1);
  r0 = std::clamp<int64_t>(r0, 0, height - 1);
  r1 = std::clamp<int64_t>(r1, 0, height - 1);

  return PixelWindow{c0, r0, uint32_t(c1 - c0 + 1), uint32_t(r1 - r0 + 1)};
}

Raster crop(const Raster& r, const BBox& b) {
  return extract(r, crop_window(r.width, r.height, r.transform, b));
}

std::vector<std::pair<TileId, PixelWindow>> tile_grid(uint32_t width, uint32_t height) {
  std::vector<std::pair<TileId, PixelWindow>> out;
  uint32_t cols = (width + kTileSize - 1) / kTileSize;
  uint32_t rows = (height + kTileSize - 1) / kTileSize;
  out.reserve(size_t(cols) * rows);
  for (uint32_t tr = 0; tr < rows; ++tr)
    for (uint32_t tc = 0; tc < cols; ++tc)
      out.emplace_back(TileId{tc, tr}, tile_window(width, height, TileId{tc, tr}));
  return out;
}

std::vector<std::pair<TileId, PixelWindow>> tile_grid(const Raster& r) {
  return tile_grid(r.width, r.height);
}

PixelWindow tile_window(uint32_t width, uint32_t height, TileId id) {
  int64_t c0 = int64_t(id.col) * kTileSize;
  int64_t r0 = int64_t(id.row) * kTileSize;
  uint32_t w = uint32_t(std::min<int64_t>(kTileSize, int64_t(width) - c0));
  uint32_t h = uint32_t(std::min<int64_t>(kTileSize, int64_t(height) - r0));
  return PixelWindow{c0, r0, w, h};
}

Raster extract(const Raster& r, const PixelWindow& w) {
  Raster out;
  out.width = w.width;
  out.height = w.height;
  out.transform = window_transform(r.transform, w);
  out.nodata = r.nodata;
  out.crs = r.crs;
  out.samples.resize(w.pixel_count());
  for (uint32_t row = 0; row < w.height; ++row) {
    const float* src = &r.samples[r.index(uint32_t(w.col0), uint32_t(w.row0) + row)];
    std::memcpy(&out.samples[size_t(row) * w.width], src, size_t(w.width) * 4);
  }
  return out;
}

void blit(const Raster& src, const PixelWindow& src_pos, Raster& dst,
          const PixelWindow& dst_pos) {
  PixelWindow ov = window_intersection(src_pos, dst_pos);
  if (ov.empty()) return;
  for (uint32_t row = 0; row < ov.height; ++row) {
    size_t si = src.index(uint32_t(ov.col0 - src_pos.col0),
                          uint32_t(ov.row0 - src_pos.row0 + row));
    size_t di = dst.index(uint32_t(ov.col0 - dst_pos.col0),
                          uint32_t(ov.row0 - dst_pos.row0 + row));
    std::memcpy(&dst.samples[di], &src.samples[si], size_t(ov.width) * 4);
  }
}

std::string encode_vras(const Raster& r) {
  if (r.samples.size() != size_t(r.width) * r.height)
    throw Error(ErrorCode::IoError, "sample buffer does not match dimensions");
  if (r.crs.size() > 0xffff)
    throw Error(ErrorCode::IoError, "CRS label too long");

  std::string buf;
  buf.reserve(64 + r.crs.size() + r.samples.size() * 4);
  put_bytes(buf, kMagic, 5);
  put_u32(buf, r.width);
  put_u32(buf, r.height);
  put_f64(buf, r.transform.origin_x);
  put_f64(buf, r.transform.origin_y);
  put_f64(buf, r.transform.pixel_w);
  put_f64(buf, r.transform.pixel_h);
  put_f32(buf, r.nodata);
  put_u16(buf, uint16_t(r.crs.size()));
  put_bytes(buf, r.crs.data(), r.crs.size());
  if (!r.samples.empty()) put_bytes(buf, r.samples.data(), r.samples.size() * 4);
  return buf;
}

Raster decode_vras(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_vras_stream(in);
}

void write_vras(const Raster& r, const std::filesystem::path& path) {
  std::string buf = encode_vras(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(buf.data(), std::streamsize(buf.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

VrasHeader read_vras_header(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  Reader rd(in);
  return parse_header(rd);
}

Raster read_vras(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_vras_stream(in);
}

Raster read_vras_window(const std::filesystem::path& path, const PixelWindow& w) {
  std::ifstream in = open_input(path);
  Reader rd(in);
  VrasHeader h = parse_header(rd);

  if (w.empty() || w.col0 < 0 || w.row0 < 0 || w.col_end() > h.width ||
      w.row_end() > h.height)
    throw Error(ErrorCode::MalformedFile, "window outside raster bounds");

  Raster r;
  r.width = w.width;
  r.height = w.height;
  r.transform = window_transform(h.transform, w);
  r.nodata = h.nodata;
  r.crs = h.crs;
  r.samples.resize(w.pixel_count());

  for (uint32_t row = 0; row < w.height; ++row) {
    uint64_t off = h.payload_offset +
                   (uint64_t(w.row0 + row) * h.width + uint64_t(w.col0)) * 4;
    in.seekg(std::streamoff(off));
    in.read(reinterpret_cast<char*>(&r.samples[size_t(row) * w.width]),
            std::streamsize(size_t(w.width) * 4));
    if (in.gcount() != std::streamsize(size_t(w.width) * 4))
      throw Error(ErrorCode::MalformedFile, "truncated payload");
  }

  for (float& v : r.samples) v = sanitize(v, r.nodata);
  return r;
}

}  // namespace vcube
