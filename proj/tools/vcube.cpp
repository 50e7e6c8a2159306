// vcube command-line interface: scene ingestion, product registration,
// on-demand generation, cache management and synthetic scene generation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vcube/catalog.hpp"
#include "vcube/error.hpp"
#include "vcube/executor.hpp"
#include "vcube/ops.hpp"
#include "vcube/pipeline.hpp"
#include "vcube/raster.hpp"
#include "vcube/scenegen.hpp"
#include "vcube/version.hpp"

namespace {

using vcube::Error;
using vcube::ErrorCode;
using ordered_json = nlohmann::ordered_json;

// Exit codes, also documented in the README:
//   0 ok, 2 usage, 3 parse/validate, 4 catalog, 5 no matching data,
//   6 fetch failure, 7 internal.
int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError:
    case ErrorCode::UnknownOp:
    case ErrorCode::UnknownParam:
    case ErrorCode::ArityMismatch:
    case ErrorCode::DanglingRef:
    case ErrorCode::CycleDetected:
    case ErrorCode::ValidationFailed:
    case ErrorCode::MalformedFile:
      return 3;
    case ErrorCode::DuplicateScene:
    case ErrorCode::MissingBand:
    case ErrorCode::GridMismatch:
    case ErrorCode::DuplicateProduct:
    case ErrorCode::UnknownProduct:
      return 4;
    case ErrorCode::NoScenes:
    case ErrorCode::NoOverlap:
      return 5;
    case ErrorCode::FetchFailed:
      return 6;
    case ErrorCode::BadRequest:
    case ErrorCode::MissingSynthesisParams:
    case ErrorCode::BadTemplate:
      return 2;
    default:
      return 7;
  }
}

struct Config {
  std::string root = "vcube-data";
  std::string catalog;     // default: <root>/catalog
  std::string cache;       // default: <root>/cache
  unsigned jobs = 1;
  uint64_t max_cache_bytes = 0;  // 0 = unlimited

  std::string catalog_dir() const { return catalog.empty() ? root + "/catalog" : catalog; }
  std::string cache_dir() const { return cache.empty() ? root + "/cache" : cache; }
};

// File values override defaults; flags (applied by the caller) override both.
void load_config_file(Config& cfg, const std::string& path, bool explicit_path) {
  std::ifstream in(path);
  if (!in) {
    if (explicit_path)
      throw Error(ErrorCode::IoError, "config file not found: " + path);
    return;
  }
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorCode::BadRequest, "config file is not valid JSON: " + path);
  if (j.contains("root")) cfg.root = j["root"].get<std::string>();
  if (j.contains("catalog")) cfg.catalog = j["catalog"].get<std::string>();
  if (j.contains("cache")) cfg.cache = j["cache"].get<std::string>();
  if (j.contains("jobs")) cfg.jobs = j["jobs"].get<unsigned>();
  if (j.contains("max_cache_bytes"))
    cfg.max_cache_bytes = j["max_cache_bytes"].get<uint64_t>();
  if (cfg.jobs < 1) throw Error(ErrorCode::BadRequest, "jobs must be >= 1");
}

// Accepts integer epoch seconds, RFC 3339 timestamps, or bare dates.
int64_t parse_time(const std::string& text) {
  if (!text.empty() &&
      text.find_first_not_of("0123456789-") == std::string::npos &&
      text.find('-', 1) == std::string::npos) {
    try {
      return std::stoll(text);
    } catch (...) {
      throw Error(ErrorCode::BadRequest, "bad timestamp '" + text + "'");
    }
  }

  std::tm tm = {};
  int year, mon, day, hour = 0, min = 0, sec = 0;
  int off_h = 0, off_m = 0;
  char tzsign = 'Z';
  int n = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%n", &year, &mon, &day, &hour,
                  &min, &sec, &n) == 6) {
    std::string rest = text.substr(size_t(n));
    if (!rest.empty() && rest[0] == '.') {  // drop fractional seconds
      size_t i = 1;
      while (i < rest.size() && std::isdigit((unsigned char)rest[i])) ++i;
      rest = rest.substr(i);
    }
    if (rest == "Z" || rest == "z" || rest.empty()) {
      tzsign = 'Z';
    } else if ((rest[0] == '+' || rest[0] == '-') &&
               std::sscanf(rest.c_str() + 1, "%d:%d", &off_h, &off_m) == 2) {
      tzsign = rest[0];
    } else {
      throw Error(ErrorCode::BadRequest, "bad timestamp '" + text + "'");
    }
  } else if (std::sscanf(text.c_str(), "%d-%d-%d", &year, &mon, &day) == 3 &&
             text.size() == 10) {
    hour = min = sec = 0;
  } else {
    throw Error(ErrorCode::BadRequest, "bad timestamp '" + text + "'");
  }

  tm.tm_year = year - 1900;
  tm.tm_mon = mon - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = min;
  tm.tm_sec = sec;
  int64_t t = timegm(&tm);
  int64_t off = int64_t(off_h) * 3600 + int64_t(off_m) * 60;
  if (tzsign == '+') t -= off;
  if (tzsign == '-') t += off;
  return t;
}

std::string format_time(int64_t t) {
  std::time_t tt = t;
  std::tm tm = {};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

vcube::BBox parse_bbox(const std::string& text) {
  vcube::BBox b;
  char extra;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf%c", &b.min_x, &b.min_y, &b.max_x,
                  &b.max_y, &extra) != 4 ||
      !b.valid())
    throw Error(ErrorCode::BadRequest,
                "--bbox must be minx,miny,maxx,maxy with min < max");
  return b;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// --- commands ----------------------------------------------------------------

int cmd_ingest(const Config& cfg, const std::vector<std::string>& paths, bool json) {
  vcube::Catalog catalog(cfg.catalog_dir());

  std::vector<std::filesystem::path> sidecars;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(p))
        if (entry.path().extension() == ".json") found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      sidecars.insert(sidecars.end(), found.begin(), found.end());
    } else {
      sidecars.push_back(p);
    }
  }

  ordered_json report = ordered_json::array();
  bool any_failed = false;
  for (const auto& sc : sidecars) {
    ordered_json item;
    item["sidecar"] = sc.string();
    try {
      bool inserted = false;
      vcube::SceneRecord rec = catalog.ingest_scene(sc, &inserted);
      item["scene_id"] = rec.scene_id;
      item["status"] = inserted ? "ingested" : "unchanged";
      if (rec.sensor == vcube::Sensor::Optical) {
        vcube::Raster mask = vcube::read_vras(rec.bands.at("MASK"));
        item["cloud_ratio"] = vcube::cloud_mask_ratio(mask);
      }
    } catch (const Error& e) {
      item["status"] = "error";
      item["error"] = e.what();
      any_failed = true;
    }
    report.push_back(item);
  }

  if (json) {
    std::cout << report.dump(2) << "\n";
  } else {
    for (const auto& item : report) {
      std::cout << item["status"].get<std::string>() << "  "
                << (item.contains("scene_id") ? item["scene_id"].get<std::string>()
                                              : item["sidecar"].get<std::string>());
      if (item.contains("cloud_ratio"))
        std::cout << "  cloud_ratio=" << item["cloud_ratio"].get<double>();
      if (item.contains("error")) std::cout << "  " << item["error"].get<std::string>();
      std::cout << "\n";
    }
  }
  return any_failed ? 4 : 0;
}

int cmd_product_add(const Config& cfg, const std::string& file, bool json) {
  vcube::Catalog catalog(cfg.catalog_dir());
  std::vector<std::string> warnings;
  vcube::ProductRecord rec =
      catalog.register_product_text(read_text_file(file), &warnings);
  if (json) {
    ordered_json j;
    j["registered"] = rec.name;
    j["warnings"] = warnings;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "registered " << rec.name << "\n";
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
  }
  return 0;
}

int cmd_product_list(const Config& cfg, bool json) {
  vcube::Catalog catalog(cfg.catalog_dir());
  auto products = catalog.products();
  if (json) {
    ordered_json out = ordered_json::array();
    for (const auto& p : products) {
      ordered_json j;
      j["name"] = p.name;
      j["sensor"] = to_string(p.spec.sensor);
      j["nodes"] = p.spec.nodes.size();
      ordered_json outputs = ordered_json::array();
      for (const auto& [band, _] : p.spec.outputs) outputs.push_back(band);
      j["outputs"] = outputs;
      j["registered_at"] = p.registered_at;
      out.push_back(j);
    }
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& p : products)
      std::cout << p.name << "  " << to_string(p.spec.sensor) << "  "
                << p.spec.nodes.size() << " nodes  registered "
                << format_time(p.registered_at) << "\n";
  }
  return 0;
}

int cmd_product_show(const Config& cfg, const std::string& name, bool json) {
  vcube::Catalog catalog(cfg.catalog_dir());
  auto rec = catalog.find_product(name);
  if (!rec)
    throw Error(ErrorCode::UnknownProduct, "product '" + name + "' is not registered");
  if (json) {
    ordered_json j;
    j["name"] = rec->name;
    j["sensor"] = to_string(rec->spec.sensor);
    j["registered_at"] = rec->registered_at;
    j["spec_yaml"] = rec->canonical_yaml;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << rec->canonical_yaml;
  }
  return 0;
}

int cmd_product_graph(const Config& cfg, const std::string& name) {
  vcube::Catalog catalog(cfg.catalog_dir());
  auto rec = catalog.find_product(name);
  if (!rec)
    throw Error(ErrorCode::UnknownProduct, "product '" + name + "' is not registered");
  std::cout << vcube::render_dot(rec->spec);
  return 0;
}

struct GenerateArgs {
  std::string product;
  std::string bbox;
  std::string from, to;
  std::string center, half_window;
  std::string out_dir;
  std::string stats_file;
  bool json = false;
};

int cmd_generate(const Config& cfg, const GenerateArgs& args) {
  vcube::Catalog catalog(cfg.catalog_dir());
  vcube::TileCache cache(cfg.cache_dir());
  vcube::LocalDirFetcher fetcher;

  vcube::Request request;
  request.product = args.product;
  request.bbox = parse_bbox(args.bbox);
  request.t0 = parse_time(args.from);
  request.t1 = parse_time(args.to);
  if (!args.center.empty()) request.center = parse_time(args.center);
  if (!args.half_window.empty()) {
    try {
      request.half_window = std::stoll(args.half_window);
    } catch (...) {
      throw Error(ErrorCode::BadRequest, "--half-window must be seconds");
    }
  }

  vcube::ExecResult result =
      vcube::generate(catalog, request, cache, fetcher, cfg.jobs);

  std::filesystem::create_directories(args.out_dir);
  ordered_json written = ordered_json::array();
  for (const auto& [band, raster] : result.outputs) {
    std::filesystem::path path =
        std::filesystem::path(args.out_dir) / (band + ".vras");
    vcube::write_vras(raster, path);
    written.push_back(path.string());
  }

  if (!args.stats_file.empty()) {
    std::ofstream out(args.stats_file, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + args.stats_file);
    out << result.stats.to_json() << "\n";
  }

  if (args.json) {
    ordered_json j;
    j["product"] = args.product;
    j["outputs"] = written;
    j["stats"] = ordered_json::parse(result.stats.to_json());
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& p : written) std::cout << "wrote " << p.get<std::string>() << "\n";
    std::cout << "tiles computed " << result.stats.tiles_computed << ", from cache "
              << result.stats.tiles_from_cache << ", bytes fetched "
              << result.stats.bytes_fetched << "\n";
  }
  return 0;
}

int cmd_cache_stats(const Config& cfg) {
  vcube::TileCache cache(cfg.cache_dir());
  auto s = cache.stats();
  ordered_json j;
  j["entries"] = s.entries;
  j["bytes"] = s.bytes;
  ordered_json per = ordered_json::object();
  for (const auto& [product, usage] : s.per_product)
    per[product] = {{"entries", usage.entries}, {"bytes", usage.bytes}};
  j["per_product"] = per;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_cache_evict(const Config& cfg, uint64_t max_bytes) {
  vcube::TileCache cache(cfg.cache_dir());
  uint64_t evicted = cache.evict(max_bytes);
  auto s = cache.stats();
  ordered_json j;
  j["evicted"] = evicted;
  j["entries"] = s.entries;
  j["bytes"] = s.bytes;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ops_list() {
  const auto& registry = vcube::OpRegistry::instance();
  ordered_json out = ordered_json::array();
  for (const vcube::OpSignature* sig : registry.list()) {
    ordered_json j;
    j["name"] = sig->name;
    j["temporal"] = sig->temporal;

    std::vector<std::string> fixed = sig->input_roles({});
    if (!fixed.empty() || sig->params.empty()) {
      j["inputs"] = fixed;
    } else {
      // Arity depends on an enum param: enumerate the variants.
      ordered_json variants = ordered_json::object();
      for (const auto& p : sig->params)
        if (!p.allowed.empty())
          for (const auto& value : p.allowed)
            variants[value] = sig->input_roles({{p.name, value}});
      j["inputs"] = variants;
    }

    ordered_json params = ordered_json::array();
    for (const auto& p : sig->params) {
      ordered_json pj;
      pj["name"] = p.name;
      pj["type"] = vcube::param_type_name(p.type);
      pj["required"] = p.required;
      if (p.default_value) pj["default"] = vcube::param_to_string(*p.default_value);
      if (!p.allowed.empty()) pj["allowed"] = p.allowed;
      params.push_back(pj);
    }
    j["params"] = params;
    out.push_back(j);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct ScenegenArgs {
  std::string sensor;
  uint64_t seed = 0;
  unsigned dates = 1;
  std::string start = "2021-01-01";
  unsigned interval_days = 30;
  unsigned width = 256;
  unsigned height = 256;
  double cloud_fraction = 0.3;
  double looks = 4.0;
  std::string out_dir;
  bool json = false;
};

int cmd_scenegen(const ScenegenArgs& args) {
  vcube::SceneTemplate tpl;
  tpl.width = args.width;
  tpl.height = args.height;
  tpl.seed = args.seed;
  tpl.cloud_fraction = args.cloud_fraction;
  tpl.looks = args.looks;

  int64_t start = parse_time(args.start);
  for (unsigned d = 0; d < args.dates; ++d)
    tpl.timestamps.push_back(start + int64_t(d) * int64_t(args.interval_days) * 86400);

  vcube::GeneratedScenes result;
  if (args.sensor == "optical") {
    tpl.sensor = vcube::Sensor::Optical;
    result = vcube::gen_optical(tpl, args.out_dir);
  } else if (args.sensor == "sar") {
    tpl.sensor = vcube::Sensor::Sar;
    result = vcube::gen_sar(tpl, args.out_dir);
  } else {
    throw Error(ErrorCode::BadTemplate, "sensor must be 'optical' or 'sar'");
  }

  if (args.json) {
    ordered_json j;
    ordered_json sidecars = ordered_json::array();
    for (const auto& p : result.sidecars) sidecars.push_back(p.string());
    j["sidecars"] = sidecars;
    j["truth_dir"] = result.truth_dir.string();
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& p : result.sidecars) std::cout << "wrote " << p.string() << "\n";
    std::cout << "truth fields in " << result.truth_dir.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vcube: on-demand virtual raster products over a scene catalog"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vcube::kEngineVersion));

  Config cfg;
  std::string config_path;
  std::string root_flag, catalog_flag, cache_flag;
  unsigned jobs_flag = 0;
  app.add_option("--config", config_path, "JSON config file (default ./vcube.json)");
  app.add_option("--root", root_flag, "data root (default vcube-data)");
  app.add_option("--catalog", catalog_flag, "catalog directory (default <root>/catalog)");
  app.add_option("--cache", cache_flag, "cache directory (default <root>/cache)");
  app.add_option("--jobs", jobs_flag, "worker threads for generation (default 1)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "ingest scene sidecars");
  std::vector<std::string> ingest_paths;
  bool ingest_json = false;
  ingest->add_option("sidecars", ingest_paths, "sidecar files or directories")
      ->required();
  ingest->add_flag("--json", ingest_json, "machine-readable report");

  // product
  auto* product = app.add_subcommand("product", "manage virtual products");
  product->require_subcommand(1);
  auto* padd = product->add_subcommand("add", "register a product declaration");
  std::string padd_file;
  bool padd_json = false;
  padd->add_option("file", padd_file, "YAML declaration")->required();
  padd->add_flag("--json", padd_json);
  auto* plist = product->add_subcommand("list", "list registered products");
  bool plist_json = false;
  plist->add_flag("--json", plist_json);
  auto* pshow = product->add_subcommand("show", "print a product declaration");
  std::string pshow_name;
  bool pshow_json = false;
  pshow->add_option("name", pshow_name)->required();
  pshow->add_flag("--json", pshow_json);
  auto* pgraph = product->add_subcommand("graph", "emit the pipeline DAG as DOT");
  std::string pgraph_name;
  pgraph->add_option("name", pgraph_name)->required();

  // generate
  auto* gen = app.add_subcommand("generate", "materialize a product for an area");
  GenerateArgs gen_args;
  gen->add_option("product", gen_args.product)->required();
  gen->add_option("--bbox", gen_args.bbox, "minx,miny,maxx,maxy")->required();
  gen->add_option("--from", gen_args.from, "window start (RFC 3339 or epoch)")
      ->required();
  gen->add_option("--to", gen_args.to, "window end")->required();
  gen->add_option("--center", gen_args.center, "synthesis center date");
  gen->add_option("--half-window", gen_args.half_window, "synthesis half window, seconds");
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();
  gen->add_option("--stats", gen_args.stats_file, "write run stats JSON here");
  gen->add_flag("--json", gen_args.json);

  // cache
  auto* cachecmd = app.add_subcommand("cache", "inspect or trim the tile cache");
  cachecmd->require_subcommand(1);
  auto* cstats = cachecmd->add_subcommand("stats", "cache usage summary");
  auto* cevict = cachecmd->add_subcommand("evict", "evict oldest entries");
  uint64_t evict_max = 0;
  cevict->add_option("--max-bytes", evict_max, "target total payload bytes")
      ->required();

  // ops
  auto* opscmd = app.add_subcommand("ops", "processing operation registry");
  opscmd->require_subcommand(1);
  auto* olist = opscmd->add_subcommand("list", "registry as JSON");

  // scenegen
  auto* sgen = app.add_subcommand("scenegen", "generate synthetic scenes");
  ScenegenArgs sg_args;
  sgen->add_option("sensor", sg_args.sensor, "optical | sar")->required();
  sgen->add_option("--seed", sg_args.seed, "RNG seed (default 0)");
  sgen->add_option("--dates", sg_args.dates, "number of scenes (default 1)");
  sgen->add_option("--start", sg_args.start, "first timestamp (default 2021-01-01)");
  sgen->add_option("--interval-days", sg_args.interval_days, "spacing (default 30)");
  sgen->add_option("--width", sg_args.width, "pixels (default 256)");
  sgen->add_option("--height", sg_args.height, "pixels (default 256)");
  sgen->add_option("--cloud-fraction", sg_args.cloud_fraction,
                   "optical cloud cover in [0,1] (default 0.3)");
  sgen->add_option("--looks", sg_args.looks, "SAR speckle looks (default 4)");
  sgen->add_option("--out", sg_args.out_dir, "output directory")->required();
  sgen->add_flag("--json", sg_args.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    // Config precedence: defaults < file < flags.
    load_config_file(cfg, config_path.empty() ? "vcube.json" : config_path,
                     !config_path.empty());
    if (!root_flag.empty()) cfg.root = root_flag;
    if (!catalog_flag.empty()) cfg.catalog = catalog_flag;
    if (!cache_flag.empty()) cfg.cache = cache_flag;
    if (jobs_flag > 0) cfg.jobs = jobs_flag;

    if (ingest->parsed()) return cmd_ingest(cfg, ingest_paths, ingest_json);
    if (padd->parsed()) return cmd_product_add(cfg, padd_file, padd_json);
    if (plist->parsed()) return cmd_product_list(cfg, plist_json);
    if (pshow->parsed()) return cmd_product_show(cfg, pshow_name, pshow_json);
    if (pgraph->parsed()) return cmd_product_graph(cfg, pgraph_name);
    if (gen->parsed()) return cmd_generate(cfg, gen_args);
    if (cstats->parsed()) return cmd_cache_stats(cfg);
    if (cevict->parsed()) return cmd_cache_evict(cfg, evict_max);
    if (olist->parsed()) return cmd_ops_list();
    if (sgen->parsed()) return cmd_scenegen(sg_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 7;
  }
  return 0;
}
