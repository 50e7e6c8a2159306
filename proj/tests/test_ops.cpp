#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vcube/error.hpp"
#include "vcube/ops.hpp"

using namespace vcube;
using testutil::error_code_of;
using testutil::make_raster;

// Scalar transcriptions of the index formulas, kept independent of the raster
// kernels on purpose: they are the oracle the kernels are checked against.
namespace oracle {

double ndvi(double nir, double red) { return (nir - red) / (nir + red); }
double evi(double nir, double red, double blue) {
  return 2.5 * (nir - red) / (nir + 6.0 * red - 7.5 * blue + 1.0);
}
double ari(double green, double rededge) { return 1.0 / green - 1.0 / rededge; }
double msavi(double nir, double red) {
  double b = 2.0 * nir + 1.0;
  return (b - std::sqrt(b * b - 8.0 * (nir - red))) / 2.0;
}
double mcari(double rededge, double red, double green) {
  return ((rededge - red) - 0.2 * (rededge - green)) * (rededge / red);
}
double sipi(double nir, double blue, double red) { return (nir - blue) / (nir - red); }
double ndwi(double green, double nir) { return (green - nir) / (green + nir); }
double nbr(double nir, double swir) { return (nir - swir) / (nir + swir); }

}  // namespace oracle

namespace {

Raster one_pixel(float v) { return make_raster(1, 1, {v}); }

float index_pixel(BandIndexKind kind, const std::vector<float>& values) {
  std::vector<Raster> inputs;
  for (float v : values) inputs.push_back(one_pixel(v));
  return band_index(kind, inputs).samples[0];
}

bool close_rel(double a, double b, double tol = 1e-6) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= tol * scale;
}

}  // namespace

TEST_CASE("NDVI basics") {
  CHECK(index_pixel(BandIndexKind::NDVI, {0.8f, 0.2f}) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(index_pixel(BandIndexKind::NDVI, {0.37f, 0.37f}) == 0.0f);
  // zero denominator yields nodata
  Raster out = band_index(BandIndexKind::NDVI, {one_pixel(0.0f), one_pixel(0.0f)});
  CHECK(out.is_nodata(out.samples[0]));
}

TEST_CASE("EVI and MSAVI match the scalar oracle") {
  CHECK(close_rel(index_pixel(BandIndexKind::EVI, {0.5f, 0.1f, 0.05f}),
                  oracle::evi(0.5f, 0.1f, 0.05f)));
  float msavi = index_pixel(BandIndexKind::MSAVI, {0.5f, 0.1f});
  CHECK(close_rel(msavi, oracle::msavi(0.5f, 0.1f)));
  CHECK(msavi >= -1.0f);
  CHECK(msavi <= 1.5f);
}

TEST_CASE("every index matches its scalar oracle on random reflectances") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> refl(0.01, 1.0);

  auto check2 = [&](BandIndexKind kind, double (*fn)(double, double)) {
    for (int iter = 0; iter < 100; ++iter) {
      float a = float(refl(rng)), b = float(refl(rng));
      INFO("kind=", int(kind), " iter=", iter);
      CHECK(close_rel(index_pixel(kind, {a, b}), fn(a, b)));
    }
  };
  auto check3 = [&](BandIndexKind kind, double (*fn)(double, double, double)) {
    for (int iter = 0; iter < 100; ++iter) {
      float a = float(refl(rng)), b = float(refl(rng)), c = float(refl(rng));
      INFO("kind=", int(kind), " iter=", iter);
      CHECK(close_rel(index_pixel(kind, {a, b, c}), fn(a, b, c)));
    }
  };

  check2(BandIndexKind::NDVI, oracle::ndvi);
  check3(BandIndexKind::EVI, oracle::evi);
  check2(BandIndexKind::ARI, oracle::ari);
  check2(BandIndexKind::MSAVI, oracle::msavi);
  check3(BandIndexKind::MCARI, oracle::mcari);
  check3(BandIndexKind::SIPI, oracle::sipi);
  check2(BandIndexKind::NDWI, oracle::ndwi);
  check2(BandIndexKind::NBR, oracle::nbr);
}

TEST_CASE("normalized-difference indexes stay in [-1, 1]") {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> refl(0.0, 2.0);
  for (int iter = 0; iter < 300; ++iter) {
    float a = float(refl(rng)), b = float(refl(rng));
    for (BandIndexKind kind :
         {BandIndexKind::NDVI, BandIndexKind::NDWI, BandIndexKind::NBR}) {
      if (a + b <= 0) continue;
      float v = index_pixel(kind, {a, b});
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("any nodata operand poisons the pixel") {
  const float nd = kDefaultNodata;
  for (BandIndexKind kind : {BandIndexKind::NDVI, BandIndexKind::EVI,
                             BandIndexKind::MCARI, BandIndexKind::SIPI}) {
    size_t arity = band_index_roles(kind).size();
    for (size_t poison = 0; poison < arity; ++poison) {
      std::vector<float> vals(arity, 0.4f);
      vals[poison] = nd;
      Raster out;
      std::vector<Raster> inputs;
      for (float v : vals) inputs.push_back(one_pixel(v));
      out = band_index(kind, inputs);
      CHECK(out.is_nodata(out.samples[0]));
    }
  }
}

TEST_CASE("pointwise ops commute with pixel permutations") {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> refl(0.05, 1.0);
  const uint32_t n = 24;
  std::vector<float> nir(n), red(n);
  for (uint32_t i = 0; i < n; ++i) {
    nir[i] = float(refl(rng));
    red[i] = float(refl(rng));
  }

  std::vector<uint32_t> perm(n);
  for (uint32_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<float> nir_p(n), red_p(n);
  for (uint32_t i = 0; i < n; ++i) {
    nir_p[i] = nir[perm[i]];
    red_p[i] = red[perm[i]];
  }

  Raster a = band_index(BandIndexKind::NDVI,
                        {make_raster(n, 1, nir), make_raster(n, 1, red)});
  Raster b = band_index(BandIndexKind::NDVI,
                        {make_raster(n, 1, nir_p), make_raster(n, 1, red_p)});
  for (uint32_t i = 0; i < n; ++i)
    CHECK(b.samples[i] == a.samples[perm[i]]);
}

// --- temporal synthesis -------------------------------------------------------

namespace {

TimeStack make_stack(const std::vector<int64_t>& times,
                     const std::vector<std::vector<float>>& values,
                     const std::vector<std::vector<float>>& masks, uint32_t w,
                     uint32_t h) {
  TimeStack stack;
  for (size_t d = 0; d < times.size(); ++d) {
    TimeStack::Slice s;
    s.timestamp = times[d];
    s.data = make_raster(w, h, values[d]);
    s.mask = make_raster(w, h, masks[d]);
    stack.slices.push_back(std::move(s));
  }
  return stack;
}

// Brute-force per-pixel reference, written independently of the kernel.
float synth_pixel(const std::vector<int64_t>& times, const std::vector<float>& values,
                  const std::vector<float>& masks, int64_t center, int64_t half,
                  float nodata) {
  double sw = 0, swx = 0;
  for (size_t d = 0; d < times.size(); ++d) {
    double w = 1.0 - double(std::llabs(times[d] - center)) / double(half);
    if (w <= 0) continue;
    if (values[d] == nodata) continue;
    if (masks[d] != 1.0f) continue;
    sw += w;
    swx += w * double(values[d]);
  }
  return sw > 0 ? float(swx / sw) : nodata;
}

}  // namespace

TEST_CASE("synthesis identities") {
  SUBCASE("single clear date at the center returns it exactly") {
    auto stack = make_stack({100}, {{0.42f}}, {{1.0f}}, 1, 1);
    Raster out = temporal_synthesis(stack, 100, 50);
    CHECK(out.samples[0] == 0.42f);
  }

  SUBCASE("two equidistant clear dates average") {
    auto stack = make_stack({90, 110}, {{0.2f}, {0.4f}}, {{1.0f}, {1.0f}}, 1, 1);
    Raster out = temporal_synthesis(stack, 100, 50);
    CHECK(out.samples[0] == doctest::Approx(0.3).epsilon(1e-6));
  }

  SUBCASE("all-cloudy pixel becomes nodata") {
    auto stack = make_stack({90, 110}, {{0.2f}, {0.4f}}, {{0.0f}, {0.0f}}, 1, 1);
    Raster out = temporal_synthesis(stack, 100, 50);
    CHECK(out.is_nodata(out.samples[0]));
  }

  SUBCASE("empty stack is an error") {
    TimeStack empty;
    CHECK(error_code_of([&] { temporal_synthesis(empty, 0, 1); }) ==
          ErrorCode::EmptyStack);
  }
}

TEST_CASE("synthesis equals the brute-force loop bit for bit") {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> refl(0.0, 1.0);
  std::uniform_int_distribution<int> mask_die(0, 3);

  const uint32_t w = 16, h = 16;
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<int64_t> times = {10, 30, 55, 70, 95};
    std::vector<std::vector<float>> values(5), masks(5);
    for (int d = 0; d < 5; ++d) {
      values[d].resize(w * h);
      masks[d].resize(w * h);
      for (auto& v : values[d])
        v = mask_die(rng) == 0 ? kDefaultNodata : float(refl(rng));
      for (auto& m : masks[d]) {
        int k = mask_die(rng);
        m = k == 0 ? 0.0f : (k == 1 ? kDefaultNodata : 1.0f);
      }
    }
    int64_t center = 50, half = 40;
    auto stack = make_stack(times, values, masks, w, h);
    Raster out = temporal_synthesis(stack, center, half);

    for (uint32_t i = 0; i < w * h; ++i) {
      std::vector<float> vals, ms;
      for (int d = 0; d < 5; ++d) {
        vals.push_back(values[d][i]);
        ms.push_back(masks[d][i]);
      }
      float expected = synth_pixel(times, vals, ms, center, half, kDefaultNodata);
      CHECK(std::bit_cast<uint32_t>(out.samples[i]) == std::bit_cast<uint32_t>(expected));
    }
  }
}

TEST_CASE("synthesis output is a convex combination of clear observations") {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> refl(0.0, 1.0);
  std::uniform_int_distribution<int> die(0, 2);

  const uint32_t w = 8, h = 8;
  std::vector<int64_t> times = {0, 20, 40, 60};
  std::vector<std::vector<float>> values(4), masks(4);
  for (int d = 0; d < 4; ++d) {
    values[d].resize(w * h);
    masks[d].resize(w * h);
    for (auto& v : values[d]) v = float(refl(rng));
    for (auto& m : masks[d]) m = die(rng) == 0 ? 0.0f : 1.0f;
  }
  auto stack = make_stack(times, values, masks, w, h);
  Raster out = temporal_synthesis(stack, 30, 60);

  for (uint32_t i = 0; i < w * h; ++i) {
    float lo = 2.0f, hi = -1.0f;
    for (int d = 0; d < 4; ++d) {
      double weight = 1.0 - std::llabs(times[d] - 30) / 60.0;
      if (masks[d][i] == 1.0f && weight > 0) {
        lo = std::min(lo, values[d][i]);
        hi = std::max(hi, values[d][i]);
      }
    }
    if (out.is_nodata(out.samples[i])) {
      CHECK(lo > hi);  // no clear observation with positive weight
    } else {
      CHECK(out.samples[i] >= lo);
      CHECK(out.samples[i] <= hi);
    }
  }
}

// --- SAR chain ------------------------------------------------------------------

TEST_CASE("calibration examples") {
  auto cal = [](float dn, float a) {
    Raster out = calibrate_sigma0(one_pixel(dn), one_pixel(a));
    return out.samples[0];
  };
  CHECK(cal(10.0f, 10.0f) == 1.0f);
  CHECK(cal(0.0f, 7.0f) == 0.0f);
  CHECK(cal(5.0f, 2.0f) == 6.25f);

  Raster bad_a = calibrate_sigma0(one_pixel(5.0f), one_pixel(-1.0f));
  CHECK(bad_a.is_nodata(bad_a.samples[0]));
  Raster nd = calibrate_sigma0(one_pixel(kDefaultNodata), one_pixel(2.0f));
  CHECK(nd.is_nodata(nd.samples[0]));
}

TEST_CASE("multilook") {
  SUBCASE("factor 1 is the identity") {
    std::mt19937_64 rng(106);
    Raster r = testutil::random_raster(rng);
    CHECK(bitwise_equal(multilook(r, 1), r));
  }

  SUBCASE("2x2 block mean") {
    Raster r = make_raster(2, 2, {1, 2, 3, 4});
    Raster out = multilook(r, 2);
    REQUIRE(out.width == 1);
    REQUIRE(out.height == 1);
    CHECK(out.samples[0] == 2.5f);
    CHECK(out.transform.pixel_w == 2.0);
    CHECK(out.transform.pixel_h == 2.0);
  }

  SUBCASE("nodata samples are excluded from the mean") {
    Raster r = make_raster(2, 2, {1, kDefaultNodata, 3, kDefaultNodata});
    CHECK(multilook(r, 2).samples[0] == 2.0f);
  }

  SUBCASE("an all-nodata block stays nodata") {
    Raster r = make_raster(2, 2, std::vector<float>(4, kDefaultNodata));
    Raster out = multilook(r, 2);
    CHECK(out.is_nodata(out.samples[0]));
  }

  SUBCASE("dimensions round up") {
    Raster r = make_raster(3, 3, std::vector<float>(9, 1.0f));
    Raster out = multilook(r, 2);
    CHECK(out.width == 2);
    CHECK(out.height == 2);
    CHECK(out.samples == std::vector<float>(4, 1.0f));
  }
}

TEST_CASE("lee filter") {
  SUBCASE("constant rasters pass through bit-exactly") {
    Raster r = make_raster(7, 5, std::vector<float>(35, 3.25f));
    CHECK(bitwise_equal(lee_filter(r, 3, 4.0), r));
  }

  SUBCASE("a lone bright pixel is pulled toward the local mean") {
    std::vector<float> samples(25, 10.0f);
    samples[12] = 100.0f;  // center of 5x5
    Raster r = make_raster(5, 5, samples);
    Raster out = lee_filter(r, 3, 1.0);

    // Independent per-pixel evaluation at the bright spot.
    double mean = (8 * 10.0 + 100.0) / 9.0;
    double var = 0;
    for (int i = 0; i < 8; ++i) var += (10.0 - mean) * (10.0 - mean);
    var += (100.0 - mean) * (100.0 - mean);
    var /= 9.0;
    double gain = std::max(0.0, var - mean * mean * 1.0) / var;
    double expected = mean + gain * (100.0 - mean);

    CHECK(out.at(2, 2) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(out.at(2, 2) > 10.0f);
    CHECK(out.at(2, 2) < 100.0f);
  }

  SUBCASE("smooths synthetic speckle") {
    std::mt19937_64 rng(107);
    std::gamma_distribution<double> gamma(4.0, 0.25);  // mean 1
    std::vector<float> samples(40 * 40);
    for (auto& s : samples) s = float(5.0 * gamma(rng));
    Raster r = make_raster(40, 40, samples);
    Raster out = lee_filter(r, 5, 4.0);

    auto variance = [](const std::vector<float>& v) {
      double m = 0;
      for (float x : v) m += x;
      m /= double(v.size());
      double var = 0;
      for (float x : v) var += (x - m) * (x - m);
      return var / double(v.size());
    };
    CHECK(variance(out.samples) < variance(r.samples));
  }

  SUBCASE("nodata center stays nodata") {
    std::vector<float> samples(9, 1.0f);
    samples[4] = kDefaultNodata;
    Raster out = lee_filter(make_raster(3, 3, samples), 3, 1.0);
    CHECK(out.is_nodata(out.at(1, 1)));
    CHECK(out.at(0, 0) == 1.0f);
  }

  SUBCASE("window validation") {
    Raster r = make_raster(3, 3, std::vector<float>(9, 1.0f));
    CHECK(error_code_of([&] { lee_filter(r, 4, 1.0); }) == ErrorCode::BadWindow);
    CHECK(error_code_of([&] { lee_filter(r, 1, 1.0); }) == ErrorCode::BadWindow);
  }
}

TEST_CASE("dB conversions") {
  CHECK(to_db(one_pixel(1.0f)).samples[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(to_db(one_pixel(0.1f)).samples[0] == doctest::Approx(-10.0).epsilon(1e-6));

  Raster zero = to_db(one_pixel(0.0f));
  CHECK(zero.is_nodata(zero.samples[0]));
  Raster neg = to_db(one_pixel(-3.0f));
  CHECK(neg.is_nodata(neg.samples[0]));

  SUBCASE("round trip on positives within 1e-6 relative") {
    std::mt19937_64 rng(108);
    std::uniform_real_distribution<double> val(1e-4, 1e4);
    std::vector<float> samples(64);
    for (auto& s : samples) s = float(val(rng));
    samples[0] = 0.37f;
    Raster r = make_raster(8, 8, samples);
    Raster back = from_db(to_db(r));
    for (uint32_t i = 0; i < 64; ++i)
      CHECK(back.samples[i] ==
            doctest::Approx(samples[i]).epsilon(1e-6));
  }
}

TEST_CASE("cloud mask ratio") {
  CHECK(cloud_mask_ratio(make_raster(2, 2, {1, 1, 1, 1})) == 0.0);
  CHECK(cloud_mask_ratio(make_raster(2, 2, {0, 0, 0, 0})) == 1.0);
  // 3 cloudy of 4 valid plus 2 nodata
  CHECK(cloud_mask_ratio(make_raster(3, 2, {0, 0, 0, 1, kDefaultNodata,
                                            kDefaultNodata})) == 0.75);
  CHECK(error_code_of([&] {
          cloud_mask_ratio(make_raster(1, 2, {kDefaultNodata, kDefaultNodata}));
        }) == ErrorCode::AllNodata);
}

TEST_CASE("registry introspection") {
  const auto& reg = OpRegistry::instance();
  CHECK(reg.find("band_index") != nullptr);
  CHECK(reg.find("temporal_synthesis")->temporal);
  CHECK(reg.find("sharpen") == nullptr);
  CHECK(reg.list().size() == 7);

  auto roles = reg.find("band_index")->input_roles({{"index", std::string("EVI")}});
  CHECK(roles == std::vector<std::string>{"nir", "red", "blue"});
}
