#include "vcube/ops.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "vcube/error.hpp"

namespace vcube {

namespace {

// Rounds the working-precision value to f32 and maps any non-finite result
// to the sentinel.
inline float finish(double v, float nodata) {
  float f = float(v);
  return std::isfinite(f) ? f : nodata;
}

void require_same_grid(const std::vector<Raster>& inputs, const char* op) {
  for (size_t i = 1; i < inputs.size(); ++i)
    if (!inputs[0].same_grid(inputs[i]))
      throw Error(ErrorCode::GridMismatch,
                  std::string(op) + ": inputs are not co-registered");
}

Raster like(const Raster& r) {
  Raster out;
  out.width = r.width;
  out.height = r.height;
  out.transform = r.transform;
  out.nodata = r.nodata;
  out.crs = r.crs;
  out.samples.resize(size_t(r.width) * r.height);
  return out;
}

}  // namespace

const char* param_type_name(ParamType t) {
  switch (t) {
    case ParamType::Int: return "int";
    case ParamType::Float: return "float";
    case ParamType::Bool: return "bool";
    case ParamType::String: return "string";
  }
  return "?";
}

ParamType param_type_of(const ParamValue& v) {
  switch (v.index()) {
    case 0: return ParamType::Int;
    case 1: return ParamType::Float;
    case 2: return ParamType::Bool;
    default: return ParamType::String;
  }
}

std::string param_to_string(const ParamValue& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), *d);
    return std::string(buf, end);
  }
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::get<std::string>(v);
}

const ParamSpec* OpSignature::find_param(const std::string& pname) const {
  for (const auto& p : params)
    if (p.name == pname) return &p;
  return nullptr;
}

// --- Spectral indexes ---------------------------------------------------------

const std::vector<std::string>& band_index_names() {
  static const std::vector<std::string> names = {"ARI",   "EVI",  "MCARI", "MSAVI",
                                                 "NBR",   "NDVI", "NDWI",  "SIPI"};
  return names;
}

BandIndexKind band_index_from_string(const std::string& name) {
  if (name == "NDVI") return BandIndexKind::NDVI;
  if (name == "EVI") return BandIndexKind::EVI;
  if (name == "ARI") return BandIndexKind::ARI;
  if (name == "MSAVI") return BandIndexKind::MSAVI;
  if (name == "MCARI") return BandIndexKind::MCARI;
  if (name == "SIPI") return BandIndexKind::SIPI;
  if (name == "NDWI") return BandIndexKind::NDWI;
  if (name == "NBR") return BandIndexKind::NBR;
  throw Error(ErrorCode::UnknownParam, "unknown index '" + name + "'");
}

std::vector<std::string> band_index_roles(BandIndexKind kind) {
  switch (kind) {
    case BandIndexKind::NDVI: return {"nir", "red"};
    case BandIndexKind::EVI: return {"nir", "red", "blue"};
    case BandIndexKind::ARI: return {"green", "rededge"};
    case BandIndexKind::MSAVI: return {"nir", "red"};
    case BandIndexKind::MCARI: return {"rededge", "red", "green"};
    case BandIndexKind::SIPI: return {"nir", "blue", "red"};
    case BandIndexKind::NDWI: return {"green", "nir"};
    case BandIndexKind::NBR: return {"nir", "swir"};
  }
  return {};
}

std::vector<std::string> band_index_bands(BandIndexKind kind) {
  switch (kind) {
    case BandIndexKind::NDVI: return {"B08", "B04"};
    case BandIndexKind::EVI: return {"B08", "B04", "B02"};
    case BandIndexKind::ARI: return {"B03", "B05"};
    case BandIndexKind::MSAVI: return {"B08", "B04"};
    case BandIndexKind::MCARI: return {"B05", "B04", "B03"};
    case BandIndexKind::SIPI: return {"B08", "B02", "B04"};
    case BandIndexKind::NDWI: return {"B03", "B08"};
    case BandIndexKind::NBR: return {"B08", "B12"};
  }
  return {};
}

Raster band_index(BandIndexKind kind, const std::vector<Raster>& inputs) {
  size_t arity = band_index_roles(kind).size();
  if (inputs.size() != arity)
    throw Error(ErrorCode::ArityMismatch, "band_index expects " +
                                              std::to_string(arity) + " inputs, got " +
                                              std::to_string(inputs.size()));
  require_same_grid(inputs, "band_index");

  Raster out = like(inputs[0]);
  const float nd = out.nodata;
  const size_t n = out.samples.size();

  for (size_t i = 0; i < n; ++i) {
    bool missing = false;
    for (const Raster& in : inputs)
      if (in.is_nodata(in.samples[i])) {
        missing = true;
        break;
      }
    if (missing) {
      out.samples[i] = nd;
      continue;
    }

    double v;
    switch (kind) {
      case BandIndexKind::NDVI: {
        double nir = inputs[0].samples[i], red = inputs[1].samples[i];
        double den = nir + red;
        v = den == 0.0 ? NAN : (nir - red) / den;
        break;
      }
      case BandIndexKind::EVI: {
        double nir = inputs[0].samples[i], red = inputs[1].samples[i],
               blue = inputs[2].samples[i];
        double den = nir + 6.0 * red - 7.5 * blue + 1.0;
        v = den == 0.0 ? NAN : 2.5 * (nir - red) / den;
        break;
      }
      case BandIndexKind::ARI: {
        double green = inputs[0].samples[i], rededge = inputs[1].samples[i];
        v = (green == 0.0 || rededge == 0.0) ? NAN : 1.0 / green - 1.0 / rededge;
        break;
      }
      case BandIndexKind::MSAVI: {
        double nir = inputs[0].samples[i], red = inputs[1].samples[i];
        double disc = (2.0 * nir + 1.0) * (2.0 * nir + 1.0) - 8.0 * (nir - red);
        v = disc < 0.0 ? NAN : (2.0 * nir + 1.0 - std::sqrt(disc)) / 2.0;
        break;
      }
      case BandIndexKind::MCARI: {
        double re = inputs[0].samples[i], red = inputs[1].samples[i],
               green = inputs[2].samples[i];
        v = red == 0.0 ? NAN : ((re - red) - 0.2 * (re - green)) * (re / red);
        break;
      }
      case BandIndexKind::SIPI: {
        double nir = inputs[0].samples[i], blue = inputs[1].samples[i],
               red = inputs[2].samples[i];
        double den = nir - red;
        v = den == 0.0 ? NAN : (nir - blue) / den;
        break;
      }
      case BandIndexKind::NDWI: {
        double green = inputs[0].samples[i], nir = inputs[1].samples[i];
        double den = green + nir;
        v = den == 0.0 ? NAN : (green - nir) / den;
        break;
      }
      case BandIndexKind::NBR: {
        double nir = inputs[0].samples[i], swir = inputs[1].samples[i];
        double den = nir + swir;
        v = den == 0.0 ? NAN : (nir - swir) / den;
        break;
      }
      default:
        v = NAN;
    }
    out.samples[i] = finish(v, nd);
  }
  return out;
}

// --- Temporal synthesis -------------------------------------------------------

Raster temporal_synthesis(const TimeStack& stack, int64_t center,
                          int64_t half_window) {
  if (stack.slices.empty())
    throw Error(ErrorCode::EmptyStack, "temporal_synthesis on empty stack");
  if (half_window <= 0)
    throw Error(ErrorCode::BadRequest, "half_window must be > 0");

  const Raster& first = stack.slices[0].data;
  for (const auto& s : stack.slices) {
    if (!s.data.same_grid(first) || !s.mask.same_grid(first))
      throw Error(ErrorCode::GridMismatch, "time stack is not co-registered");
  }
  for (size_t i = 1; i < stack.slices.size(); ++i)
    if (stack.slices[i].timestamp <= stack.slices[i - 1].timestamp)
      throw Error(ErrorCode::BadRequest, "stack timestamps must be increasing");

  // Per-date weights are pixel-independent.
  std::vector<double> weight(stack.slices.size());
  for (size_t d = 0; d < stack.slices.size(); ++d) {
    double dist = double(std::llabs(stack.slices[d].timestamp - center));
    weight[d] = std::max(0.0, 1.0 - dist / double(half_window));
  }

  Raster out = like(first);
  const float nd = out.nodata;
  const size_t n = out.samples.size();

  for (size_t i = 0; i < n; ++i) {
    double sum_w = 0.0, sum_wx = 0.0;
    for (size_t d = 0; d < stack.slices.size(); ++d) {
      if (weight[d] <= 0.0) continue;
      const auto& s = stack.slices[d];
      float x = s.data.samples[i];
      if (s.data.is_nodata(x)) continue;
      float m = s.mask.samples[i];
      if (s.mask.is_nodata(m) || m != 1.0f) continue;  // clear observations only
      sum_w += weight[d];
      sum_wx += weight[d] * double(x);
    }
    out.samples[i] = sum_w > 0.0 ? finish(sum_wx / sum_w, nd) : nd;
  }
  return out;
}

// --- SAR backscatter chain ----------------------------------------------------

Raster calibrate_sigma0(const Raster& dn, const Raster& cal_a) {
  require_same_grid({dn, cal_a}, "calibrate_sigma0");

  Raster out = like(dn);
  const float nd = out.nodata;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    float d = dn.samples[i];
    float a = cal_a.samples[i];
    if (dn.is_nodata(d) || cal_a.is_nodata(a) || a <= 0.0f) {
      out.samples[i] = nd;
      continue;
    }
    out.samples[i] = finish((double(d) * d) / (double(a) * a), nd);
  }
  return out;
}

Raster multilook(const Raster& r, int64_t factor) {
  if (factor < 1)
    throw Error(ErrorCode::BadRequest, "multilook factor must be >= 1");
  if (factor == 1) return r;

  Raster out;
  out.width = uint32_t((r.width + factor - 1) / factor);
  out.height = uint32_t((r.height + factor - 1) / factor);
  out.transform = r.transform;
  out.transform.pixel_w *= double(factor);
  out.transform.pixel_h *= double(factor);
  out.nodata = r.nodata;
  out.crs = r.crs;
  out.samples.resize(size_t(out.width) * out.height);

  for (uint32_t orow = 0; orow < out.height; ++orow) {
    for (uint32_t ocol = 0; ocol < out.width; ++ocol) {
      uint32_t c0 = uint32_t(ocol * factor), r0 = uint32_t(orow * factor);
      uint32_t c1 = std::min<uint32_t>(c0 + uint32_t(factor), r.width);
      uint32_t r1 = std::min<uint32_t>(r0 + uint32_t(factor), r.height);
      double sum = 0.0;
      uint32_t count = 0;
      for (uint32_t rr = r0; rr < r1; ++rr)
        for (uint32_t cc = c0; cc < c1; ++cc) {
          float v = r.at(cc, rr);
          if (!r.is_nodata(v)) {
            sum += v;
            ++count;
          }
        }
      out.at(ocol, orow) =
          count == 0 ? out.nodata : finish(sum / count, out.nodata);
    }
  }
  return out;
}

Raster lee_filter(const Raster& r, int64_t window, double looks) {
  if (window < 3 || window % 2 == 0)
    throw Error(ErrorCode::BadWindow, "window must be odd and >= 3");
  if (!(looks > 0))
    throw Error(ErrorCode::BadRequest, "looks must be > 0");

  const int64_t radius = window / 2;
  const double noise_var = 1.0 / looks;

  Raster out = like(r);
  const float nd = out.nodata;

  for (int64_t row = 0; row < r.height; ++row) {
    for (int64_t col = 0; col < r.width; ++col) {
      float center = r.at(uint32_t(col), uint32_t(row));
      if (r.is_nodata(center)) {
        out.at(uint32_t(col), uint32_t(row)) = nd;
        continue;
      }

      int64_t c0 = std::max<int64_t>(0, col - radius);
      int64_t c1 = std::min<int64_t>(r.width - 1, col + radius);
      int64_t r0 = std::max<int64_t>(0, row - radius);
      int64_t r1 = std::min<int64_t>(r.height - 1, row + radius);

      double sum = 0.0;
      uint32_t n = 0;
      for (int64_t rr = r0; rr <= r1; ++rr)
        for (int64_t cc = c0; cc <= c1; ++cc) {
          float v = r.at(uint32_t(cc), uint32_t(rr));
          if (!r.is_nodata(v)) {
            sum += v;
            ++n;
          }
        }
      double mean = sum / n;

      double var = 0.0;
      for (int64_t rr = r0; rr <= r1; ++rr)
        for (int64_t cc = c0; cc <= c1; ++cc) {
          float v = r.at(uint32_t(cc), uint32_t(rr));
          if (!r.is_nodata(v)) {
            double dlt = double(v) - mean;
            var += dlt * dlt;
          }
        }
      var /= n;

      double gain =
          var > 0.0 ? std::max(0.0, var - mean * mean * noise_var) / var : 0.0;
      out.at(uint32_t(col), uint32_t(row)) =
          finish(mean + gain * (double(center) - mean), nd);
    }
  }
  return out;
}

Raster to_db(const Raster& r) {
  Raster out = like(r);
  const float nd = out.nodata;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    float v = r.samples[i];
    out.samples[i] = (r.is_nodata(v) || v <= 0.0f)
                         ? nd
                         : finish(10.0 * std::log10(double(v)), nd);
  }
  return out;
}

Raster from_db(const Raster& r) {
  Raster out = like(r);
  const float nd = out.nodata;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    float v = r.samples[i];
    out.samples[i] =
        r.is_nodata(v) ? nd : finish(std::pow(10.0, double(v) / 10.0), nd);
  }
  return out;
}

double cloud_mask_ratio(const Raster& mask) {
  uint64_t valid = 0, cloudy = 0;
  for (float v : mask.samples) {
    if (mask.is_nodata(v)) continue;
    ++valid;
    if (v == 0.0f) ++cloudy;
  }
  if (valid == 0) throw Error(ErrorCode::AllNodata, "mask has no valid pixels");
  return double(cloudy) / double(valid);
}

// --- Registry -----------------------------------------------------------------

namespace {

std::string check_positive_int(const ParamValue& v, const char* what, int64_t min) {
  const auto* i = std::get_if<int64_t>(&v);
  if (!i || *i < min)
    return std::string(what) + " must be an integer >= " + std::to_string(min);
  return {};
}

OpSignature make_band_index_sig() {
  OpSignature sig;
  sig.name = "band_index";
  ParamSpec index;
  index.name = "index";
  index.type = ParamType::String;
  index.required = true;
  index.allowed = band_index_names();
  sig.params.push_back(std::move(index));
  sig.input_roles = [](const ParamMap& params) -> std::vector<std::string> {
    auto it = params.find("index");
    if (it == params.end()) return {};
    return band_index_roles(band_index_from_string(std::get<std::string>(it->second)));
  };
  sig.kernel = [](const std::vector<Raster>& inputs, const ParamMap& params) {
    return band_index(
        band_index_from_string(std::get<std::string>(params.at("index"))), inputs);
  };
  return sig;
}

OpSignature make_temporal_synthesis_sig() {
  OpSignature sig;
  sig.name = "temporal_synthesis";
  sig.temporal = true;
  // center/half_window are usually supplied per request; a product may pin
  // them in the declaration instead.
  ParamSpec center;
  center.name = "center";
  center.type = ParamType::Int;
  center.required = false;
  ParamSpec half;
  half.name = "half_window";
  half.type = ParamType::Int;
  half.required = false;
  half.check = [](const ParamValue& v) {
    return check_positive_int(v, "half_window", 1);
  };
  sig.params = {center, half};
  sig.input_roles = [](const ParamMap&) { return std::vector<std::string>{"band"}; };
  return sig;
}

OpSignature make_pointwise_sig(const char* name, std::vector<std::string> roles,
                               Raster (*fn)(const std::vector<Raster>&)) {
  OpSignature sig;
  sig.name = name;
  sig.input_roles = [roles](const ParamMap&) { return roles; };
  sig.kernel = [fn](const std::vector<Raster>& inputs, const ParamMap&) {
    return fn(inputs);
  };
  return sig;
}

}  // namespace

OpRegistry::OpRegistry() {
  auto add = [this](OpSignature sig) { ops_.emplace(sig.name, std::move(sig)); };

  add(make_band_index_sig());
  add(make_temporal_synthesis_sig());

  add(make_pointwise_sig("calibrate_sigma0", {"dn", "cal_a"},
                         [](const std::vector<Raster>& in) {
                           return calibrate_sigma0(in.at(0), in.at(1));
                         }));

  {
    OpSignature sig;
    sig.name = "multilook";
    ParamSpec factor;
    factor.name = "factor";
    factor.type = ParamType::Int;
    factor.check = [](const ParamValue& v) {
      return check_positive_int(v, "factor", 1);
    };
    sig.params = {factor};
    sig.input_roles = [](const ParamMap&) { return std::vector<std::string>{"input"}; };
    sig.kernel = [](const std::vector<Raster>& in, const ParamMap& p) {
      return multilook(in.at(0), std::get<int64_t>(p.at("factor")));
    };
    add(std::move(sig));
  }

  {
    OpSignature sig;
    sig.name = "lee_filter";
    ParamSpec window;
    window.name = "window";
    window.type = ParamType::Int;
    window.check = [](const ParamValue& v) -> std::string {
      const auto* i = std::get_if<int64_t>(&v);
      if (!i || *i < 3 || *i % 2 == 0) return "window must be an odd integer >= 3";
      return {};
    };
    ParamSpec looks;
    looks.name = "looks";
    looks.type = ParamType::Float;
    looks.check = [](const ParamValue& v) -> std::string {
      const auto* d = std::get_if<double>(&v);
      if (!d || !(*d > 0)) return "looks must be > 0";
      return {};
    };
    sig.params = {window, looks};
    sig.input_roles = [](const ParamMap&) { return std::vector<std::string>{"input"}; };
    sig.kernel = [](const std::vector<Raster>& in, const ParamMap& p) {
      return lee_filter(in.at(0), std::get<int64_t>(p.at("window")),
                        std::get<double>(p.at("looks")));
    };
    add(std::move(sig));
  }

  add(make_pointwise_sig("to_db", {"input"}, [](const std::vector<Raster>& in) {
    return to_db(in.at(0));
  }));
  add(make_pointwise_sig("from_db", {"input"}, [](const std::vector<Raster>& in) {
    return from_db(in.at(0));
  }));
}

const OpRegistry& OpRegistry::instance() {
  static OpRegistry reg;
  return reg;
}

const OpSignature* OpRegistry::find(const std::string& name) const {
  auto it = ops_.find(name);
  return it == ops_.end() ? nullptr : &it->second;
}

std::vector<const OpSignature*> OpRegistry::list() const {
  std::vector<const OpSignature*> out;
  out.reserve(ops_.size());
  for (const auto& [_, sig] : ops_) out.push_back(&sig);
  return out;
}

}  // namespace vcube
