#include "vcube/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <json.hpp>

#include <fstream>

#include "vcube/error.hpp"
#include "vcube/raster.hpp"

namespace vcube {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Raw-bit uniforms instead of std::uniform_real_distribution: the standard
// distributions are not bit-stable across library implementations, and scene
// bytes must be a pure function of the seed.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }
double uniform_pos(std::mt19937_64& rng) { return 1.0 - uniform01(rng); }  // (0,1]

double normal(std::mt19937_64& rng) {
  double u1 = uniform_pos(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTau * u2);
}

// Marsaglia–Tsang, scale 1.
double gamma_sample(std::mt19937_64& rng, double shape) {
  if (shape < 1.0) {
    double u = uniform_pos(rng);
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform_pos(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Independent deterministic stream per (seed, purpose).
std::mt19937_64 stream(uint64_t seed, const std::string& purpose) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (char c : purpose) {
    h ^= uint64_t(uint8_t(c));
    h *= 1099511628211ull;
  }
  return std::mt19937_64(seed ^ h);
}

// Sum of a few random 2-D cosine modes, rescaled to [lo, hi].
std::vector<float> smooth_field(uint32_t w, uint32_t h, std::mt19937_64& rng,
                                double lo, double hi) {
  constexpr int kModes = 6;
  double amp[kModes], fx[kModes], fy[kModes], phase[kModes];
  for (int k = 0; k < kModes; ++k) {
    amp[k] = 0.5 + uniform01(rng);
    fx[k] = 0.5 + 3.5 * uniform01(rng);
    fy[k] = 0.5 + 3.5 * uniform01(rng);
    phase[k] = kTau * uniform01(rng);
  }

  std::vector<double> raw(size_t(w) * h);
  double lo_v = 1e300, hi_v = -1e300;
  for (uint32_t row = 0; row < h; ++row) {
    for (uint32_t col = 0; col < w; ++col) {
      double v = 0.0;
      for (int k = 0; k < kModes; ++k)
        v += amp[k] * std::cos(kTau * (fx[k] * col / w + fy[k] * row / h) + phase[k]);
      raw[size_t(row) * w + col] = v;
      lo_v = std::min(lo_v, v);
      hi_v = std::max(hi_v, v);
    }
  }

  double span = hi_v - lo_v;
  std::vector<float> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i)
    out[i] = span > 0.0
                 ? float(lo + (raw[i] - lo_v) / span * (hi - lo))
                 : float((lo + hi) / 2.0);
  return out;
}

GeoTransform resolved_transform(const SceneTemplate& tpl) {
  if (tpl.transform) return *tpl.transform;
  return GeoTransform{0.0, double(tpl.height) * 10.0, 10.0, 10.0};
}

void check_common(const SceneTemplate& tpl) {
  if (tpl.width == 0 || tpl.height == 0)
    throw Error(ErrorCode::BadTemplate, "raster dimensions must be positive");
  if (tpl.timestamps.empty())
    throw Error(ErrorCode::BadTemplate, "at least one timestamp is required");
  for (size_t i = 1; i < tpl.timestamps.size(); ++i)
    if (tpl.timestamps[i] <= tpl.timestamps[i - 1])
      throw Error(ErrorCode::BadTemplate, "timestamps must be strictly increasing");
  GeoTransform t = resolved_transform(tpl);
  if (!(t.pixel_w > 0) || !(t.pixel_h > 0))
    throw Error(ErrorCode::BadTemplate, "pixel sizes must be positive");
}

Raster make_raster(const SceneTemplate& tpl, std::vector<float> samples) {
  Raster r;
  r.width = tpl.width;
  r.height = tpl.height;
  r.transform = resolved_transform(tpl);
  r.crs = tpl.crs;
  r.samples = std::move(samples);
  return r;
}

void write_sidecar(const std::filesystem::path& path, const std::string& scene_id,
                   Sensor sensor, int64_t timestamp, const SceneTemplate& tpl,
                   const std::vector<std::string>& bands) {
  GeoTransform t = resolved_transform(tpl);
  ordered_json j;
  j["scene_id"] = scene_id;
  j["sensor"] = to_string(sensor);
  j["timestamp"] = timestamp;
  j["crs"] = tpl.crs;
  j["footprint"] = {t.origin_x, t.origin_y - double(tpl.height) * t.pixel_h,
                    t.origin_x + double(tpl.width) * t.pixel_w, t.origin_y};
  ordered_json bj = ordered_json::object();
  for (const auto& b : bands) bj[b] = scene_id + "/" + b + ".vras";
  j["bands"] = bj;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

GeneratedScenes gen_optical(const SceneTemplate& tpl,
                            const std::filesystem::path& out_dir) {
  if (tpl.sensor != Sensor::Optical)
    throw Error(ErrorCode::BadTemplate, "template sensor is not OPTICAL");
  check_common(tpl);
  if (tpl.cloud_fraction < 0.0 || tpl.cloud_fraction > 1.0)
    throw Error(ErrorCode::BadTemplate, "cloud_fraction must be in [0, 1]");

  const std::vector<std::string> bands = {"B02", "B03", "B04", "B05",
                                          "B08", "B11", "B12"};
  const size_t npix = size_t(tpl.width) * tpl.height;

  GeneratedScenes result;
  result.truth_dir = out_dir / "truth";
  std::filesystem::create_directories(result.truth_dir);

  std::map<std::string, std::vector<float>> base;
  for (const auto& b : bands) {
    auto rng = stream(tpl.seed, "base:" + b);
    base[b] = smooth_field(tpl.width, tpl.height, rng, 0.05, 0.6);
    write_vras(make_raster(tpl, base[b]), result.truth_dir / (b + ".vras"));
  }

  for (size_t d = 0; d < tpl.timestamps.size(); ++d) {
    std::string scene_id =
        "S2SYN-s" + std::to_string(tpl.seed) + "-d" + std::to_string(d);
    std::filesystem::path scene_dir = out_dir / scene_id;
    std::filesystem::create_directories(scene_dir);

    // Cloud blobs: threshold a smooth field at the requested quantile.
    auto cloud_rng = stream(tpl.seed, "cloud:" + std::to_string(d));
    std::vector<float> cloud_field =
        smooth_field(tpl.width, tpl.height, cloud_rng, 0.0, 1.0);
    std::vector<char> cloudy(npix, 0);
    if (tpl.cloud_fraction >= 1.0) {
      std::fill(cloudy.begin(), cloudy.end(), 1);
    } else if (tpl.cloud_fraction > 0.0) {
      std::vector<float> sorted = cloud_field;
      std::sort(sorted.begin(), sorted.end());
      float threshold = sorted[std::min(npix - 1, size_t(tpl.cloud_fraction * npix))];
      for (size_t i = 0; i < npix; ++i) cloudy[i] = cloud_field[i] < threshold;
    }

    std::vector<float> mask(npix);
    for (size_t i = 0; i < npix; ++i) mask[i] = cloudy[i] ? 0.0f : 1.0f;
    write_vras(make_raster(tpl, mask), scene_dir / "MASK.vras");

    for (const auto& b : bands) {
      auto pert_rng = stream(tpl.seed, "pert:" + b + ":" + std::to_string(d));
      std::vector<float> pert =
          smooth_field(tpl.width, tpl.height, pert_rng, -1.0, 1.0);
      auto tex_rng = stream(tpl.seed, "cloudtex:" + b + ":" + std::to_string(d));

      std::vector<float> samples(npix);
      for (size_t i = 0; i < npix; ++i) {
        if (cloudy[i]) {
          // Bright, spatially decorrelated: looks nothing like the ground.
          samples[i] = float(0.7 + 0.25 * uniform01(tex_rng));
        } else {
          samples[i] =
              std::clamp(base[b][i] + 0.01f * pert[i], 0.0f, 1.0f);
        }
      }
      write_vras(make_raster(tpl, std::move(samples)), scene_dir / (b + ".vras"));
    }

    std::vector<std::string> all_bands = bands;
    all_bands.push_back("MASK");
    std::filesystem::path sidecar = out_dir / (scene_id + ".json");
    write_sidecar(sidecar, scene_id, Sensor::Optical, tpl.timestamps[d], tpl,
                  all_bands);
    result.sidecars.push_back(sidecar);
  }
  return result;
}

GeneratedScenes gen_sar(const SceneTemplate& tpl,
                        const std::filesystem::path& out_dir) {
  if (tpl.sensor != Sensor::Sar)
    throw Error(ErrorCode::BadTemplate, "template sensor is not SAR");
  check_common(tpl);
  if (!(tpl.looks > 0))
    throw Error(ErrorCode::BadTemplate, "looks must be > 0");

  const size_t npix = size_t(tpl.width) * tpl.height;

  GeneratedScenes result;
  result.truth_dir = out_dir / "truth";
  std::filesystem::create_directories(result.truth_dir);

  auto sigma_rng = stream(tpl.seed, "sigma0");
  std::vector<float> sigma0 = smooth_field(tpl.width, tpl.height, sigma_rng, 0.02, 0.4);
  write_vras(make_raster(tpl, sigma0), result.truth_dir / "SIGMA0.vras");

  auto cal_rng = stream(tpl.seed, "cal_a");
  std::vector<float> cal = smooth_field(tpl.width, tpl.height, cal_rng, 800.0, 1200.0);

  for (size_t d = 0; d < tpl.timestamps.size(); ++d) {
    std::string scene_id =
        "S1SYN-s" + std::to_string(tpl.seed) + "-d" + std::to_string(d);
    std::filesystem::path scene_dir = out_dir / scene_id;
    std::filesystem::create_directories(scene_dir);

    auto speckle_rng = stream(tpl.seed, "speckle:" + std::to_string(d));
    std::vector<float> dn(npix);
    for (size_t i = 0; i < npix; ++i) {
      // Mean-1 gamma speckle with shape = looks.
      double speckle = gamma_sample(speckle_rng, tpl.looks) / tpl.looks;
      dn[i] = float(double(cal[i]) * std::sqrt(double(sigma0[i]) * speckle));
    }
    write_vras(make_raster(tpl, std::move(dn)), scene_dir / "VV.vras");
    write_vras(make_raster(tpl, cal), scene_dir / "CAL_A.vras");

    std::filesystem::path sidecar = out_dir / (scene_id + ".json");
    write_sidecar(sidecar, scene_id, Sensor::Sar, tpl.timestamps[d], tpl,
                  {"VV", "CAL_A"});
    result.sidecars.push_back(sidecar);
  }
  return result;
}

}  // namespace vcube
