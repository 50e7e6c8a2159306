#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vcube/geo.hpp"
#include "vcube/sensor.hpp"

namespace vcube {

// Recipe for a deterministic synthetic scene series: one scene per timestamp,
// same seed in, byte-identical files out.
struct SceneTemplate {
  Sensor sensor = Sensor::Optical;
  uint32_t width = 256;
  uint32_t height = 256;
  // Defaults to 10 m pixels with the origin placed so the extent starts at (0,0).
  std::optional<GeoTransform> transform;
  std::string crs = "EPSG:32630";
  std::vector<int64_t> timestamps;
  uint64_t seed = 0;
  double cloud_fraction = 0.3;  // optical
  double looks = 4.0;           // SAR speckle shape parameter
};

struct GeneratedScenes {
  std::vector<std::filesystem::path> sidecars;  // ready for ingest
  std::filesystem::path truth_dir;              // noise-free fields for checks
};

// Optical series: bands B02..B12 as smooth reflectance fields shared across
// dates plus a small per-date perturbation, MASK with spatially coherent
// cloud blobs at the requested fraction, and bright decorrelated samples
// under cloud. The clean per-band fields land in truth/.
GeneratedScenes gen_optical(const SceneTemplate& tpl,
                            const std::filesystem::path& out_dir);

// SAR series: ground-truth sigma0 field, smooth calibration grid CAL_A, and
// per-date VV digital numbers DN = A * sqrt(sigma0 * speckle) with mean-1
// gamma speckle of the requested number of looks. truth/SIGMA0.vras holds the
// clean field.
GeneratedScenes gen_sar(const SceneTemplate& tpl,
                        const std::filesystem::path& out_dir);

}  // namespace vcube
