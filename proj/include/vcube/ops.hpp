#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vcube/raster.hpp"

namespace vcube {

// --- Operation parameters ---------------------------------------------------

enum class ParamType { Int, Float, Bool, String };

using ParamValue = std::variant<int64_t, double, bool, std::string>;
// std::map keeps params sorted by name, which keeps every serialized form
// (canonical YAML, cache descriptors) deterministic.
using ParamMap = std::map<std::string, ParamValue>;

const char* param_type_name(ParamType t);
ParamType param_type_of(const ParamValue& v);
// Canonical scalar text: shortest round-trip form for floats.
std::string param_to_string(const ParamValue& v);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  bool required = true;
  std::optional<ParamValue> default_value;
  std::vector<std::string> allowed;  // non-empty => closed string enum
  // Returns an error message, or empty when the value is acceptable.
  std::function<std::string(const ParamValue&)> check;
};

struct OpSignature {
  std::string name;
  // Temporal-aggregate ops consume a time-stack; everything else consumes
  // co-registered single-time rasters.
  bool temporal = false;
  std::vector<ParamSpec> params;
  // Input roles (and therefore arity) may depend on params: band_index takes
  // different bands per index.
  std::function<std::vector<std::string>(const ParamMap&)> input_roles;
  std::function<Raster(const std::vector<Raster>&, const ParamMap&)> kernel;

  const ParamSpec* find_param(const std::string& name) const;
};

class OpRegistry {
 public:
  static const OpRegistry& instance();

  const OpSignature* find(const std::string& name) const;
  // Sorted by name.
  std::vector<const OpSignature*> list() const;

 private:
  OpRegistry();
  std::map<std::string, OpSignature> ops_;
};

// --- Spectral indexes ---------------------------------------------------------

enum class BandIndexKind { NDVI, EVI, ARI, MSAVI, MCARI, SIPI, NDWI, NBR };

const std::vector<std::string>& band_index_names();
BandIndexKind band_index_from_string(const std::string& name);
// Input roles in formula order, e.g. NDVI -> {nir, red}.
std::vector<std::string> band_index_roles(BandIndexKind kind);
// Conventional Sentinel-2 band for each role, e.g. NDVI -> {B08, B04}.
std::vector<std::string> band_index_bands(BandIndexKind kind);

// Per-pixel index computation. Division by zero, sqrt of a negative, any
// nodata operand or a non-finite result all yield nodata at that pixel.
Raster band_index(BandIndexKind kind, const std::vector<Raster>& inputs);

// --- Temporal synthesis -------------------------------------------------------

// Multi-date stack of one band plus parallel cloud masks
// (1.0 = clear, 0.0 = cloudy, nodata = unobserved).
struct TimeStack {
  struct Slice {
    int64_t timestamp = 0;
    Raster data;
    Raster mask;
  };
  std::vector<Slice> slices;  // timestamps strictly increasing
};

// Weighted cloud-free composite. Per pixel, each clear observation gets the
// triangular date weight max(0, 1 - |t - center| / half_window); the output
// is the weighted mean, or nodata when no observation has positive weight.
Raster temporal_synthesis(const TimeStack& stack, int64_t center,
                          int64_t half_window);

// --- SAR backscatter chain ----------------------------------------------------

// Radiometric calibration: sigma0 = DN^2 / A^2. A <= 0 yields nodata.
Raster calibrate_sigma0(const Raster& dn, const Raster& cal_a);

// Block-average by an integer factor; output dims ceil(dims/factor), pixel
// sizes scaled by factor. Nodata samples are excluded from block means.
Raster multilook(const Raster& r, int64_t factor);

// Lee MMSE speckle filter with a square window (odd, >= 3) and the given
// number of looks. Window is clipped at raster borders.
Raster lee_filter(const Raster& r, int64_t window, double looks);

Raster to_db(const Raster& r);
Raster from_db(const Raster& r);

// Fraction of valid pixels flagged cloudy (mask == 0.0). Throws AllNodata.
double cloud_mask_ratio(const Raster& mask);

}  // namespace vcube
