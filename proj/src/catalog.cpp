#include "vcube/catalog.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "vcube/digest.hpp"
#include "vcube/error.hpp"
#include "vcube/raster.hpp"

namespace vcube {

using ordered_json = nlohmann::ordered_json;

namespace {

int64_t now_utc() { return int64_t(std::time(nullptr)); }

ordered_json parse_json(const std::string& text, const std::string& what) {
  ordered_json doc = ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorCode::MalformedFile, what + ": invalid JSON");
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string out((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return out;
}

BBox bbox_from_json(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4 || !j[0].is_number())
    throw Error(ErrorCode::MalformedFile, what + ": footprint must be [minx,miny,maxx,maxy]");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
         j[3].get<double>()};
  if (!b.valid())
    throw Error(ErrorCode::MalformedFile, what + ": footprint is not a valid bbox");
  return b;
}

ordered_json scene_to_json(const SceneRecord& s) {
  ordered_json j;
  j["kind"] = "scene";
  j["scene_id"] = s.scene_id;
  j["sensor"] = to_string(s.sensor);
  j["timestamp"] = s.timestamp;
  j["crs"] = s.crs;
  j["footprint"] = {s.footprint.min_x, s.footprint.min_y, s.footprint.max_x,
                    s.footprint.max_y};
  ordered_json bands = ordered_json::object();
  for (const auto& [name, path] : s.bands) bands[name] = path;
  j["bands"] = bands;
  ordered_json digests = ordered_json::object();
  for (const auto& [name, digest] : s.band_digests) digests[name] = digest;
  j["digests"] = digests;
  j["ingested_at"] = s.ingested_at;
  return j;
}

SceneRecord scene_from_json(const ordered_json& j) {
  SceneRecord s;
  s.scene_id = j.at("scene_id").get<std::string>();
  auto sensor = sensor_from_string(j.at("sensor").get<std::string>());
  if (!sensor) throw Error(ErrorCode::MalformedFile, "index: bad sensor");
  s.sensor = *sensor;
  s.timestamp = j.at("timestamp").get<int64_t>();
  s.crs = j.at("crs").get<std::string>();
  s.footprint = bbox_from_json(j.at("footprint"), "index");
  for (const auto& [name, path] : j.at("bands").items())
    s.bands[name] = path.get<std::string>();
  for (const auto& [name, digest] : j.at("digests").items())
    s.band_digests[name] = digest.get<std::string>();
  s.ingested_at = j.at("ingested_at").get<int64_t>();
  return s;
}

}  // namespace

Catalog::Catalog(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  load();
}

void Catalog::load() {
  std::ifstream in(index_path());
  if (!in) return;  // fresh catalog
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json j = parse_json(line, "index line " + std::to_string(lineno));
    std::string kind = j.value("kind", "");
    if (kind == "scene") {
      scenes_.push_back(scene_from_json(j));
    } else if (kind == "product") {
      ProductRecord rec;
      rec.name = j.at("name").get<std::string>();
      rec.registered_at = j.at("registered_at").get<int64_t>();
      rec.canonical_yaml = j.at("spec_yaml").get<std::string>();
      rec.spec = parse_spec(rec.canonical_yaml);
      products_.push_back(std::move(rec));
    } else {
      throw Error(ErrorCode::MalformedFile,
                  "index line " + std::to_string(lineno) + ": unknown kind");
    }
  }
}

void Catalog::append_line(const std::string& line) {
  std::ofstream out(index_path(), std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + index_path().string());
  out << line << "\n";
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for index");
}

SceneRecord Catalog::ingest_scene(const std::filesystem::path& sidecar_path,
                                  bool* inserted) {
  if (inserted) *inserted = false;
  ordered_json doc =
      parse_json(read_file(sidecar_path), "sidecar " + sidecar_path.string());
  if (!doc.is_object())
    throw Error(ErrorCode::MalformedFile, "sidecar must be a JSON object");

  SceneRecord rec;
  try {
    rec.scene_id = doc.at("scene_id").get<std::string>();
    auto sensor = sensor_from_string(doc.at("sensor").get<std::string>());
    if (!sensor)
      throw Error(ErrorCode::MalformedFile, "sidecar: sensor must be OPTICAL or SAR");
    rec.sensor = *sensor;
    rec.timestamp = doc.at("timestamp").get<int64_t>();
    rec.crs = doc.at("crs").get<std::string>();
    rec.footprint = bbox_from_json(doc.at("footprint"), "sidecar");
    if (!doc.at("bands").is_object() || doc.at("bands").empty())
      throw Error(ErrorCode::MalformedFile, "sidecar: 'bands' must be a non-empty object");
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::MalformedFile, "sidecar " + sidecar_path.string() +
                                              ": " + e.what());
  }
  if (rec.scene_id.empty())
    throw Error(ErrorCode::MalformedFile, "sidecar: empty scene_id");

  const std::filesystem::path base = std::filesystem::absolute(sidecar_path).parent_path();
  for (const auto& [name, rel] : doc.at("bands").items()) {
    std::filesystem::path p = (base / rel.get<std::string>()).lexically_normal();
    rec.bands[name] = p.string();
  }

  const char* mandated = mandatory_band(rec.sensor);
  if (!rec.bands.count(mandated))
    throw Error(ErrorCode::MissingBand,
                "scene '" + rec.scene_id + "' (" + to_string(rec.sensor) +
                    ") lacks mandatory band " + mandated);

  // All band files must exist, parse, and agree on grid and CRS.
  bool first = true;
  VrasHeader ref;
  for (const auto& [name, path] : rec.bands) {
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::MissingBand,
                  "band " + name + " file not found: " + path);
    VrasHeader h = read_vras_header(path);
    if (h.crs != rec.crs)
      throw Error(ErrorCode::GridMismatch,
                  "band " + name + " CRS '" + h.crs + "' differs from sidecar '" +
                      rec.crs + "'");
    if (first) {
      ref = h;
      first = false;
    } else if (h.width != ref.width || h.height != ref.height ||
               h.transform != ref.transform) {
      throw Error(ErrorCode::GridMismatch,
                  "band " + name + " grid differs from other bands");
    }
    rec.band_digests[name] = sha256_file(path);
  }

  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& existing : scenes_) {
    if (existing.scene_id != rec.scene_id) continue;
    if (existing.band_digests == rec.band_digests &&
        existing.sensor == rec.sensor && existing.timestamp == rec.timestamp)
      return existing;  // identical content: no-op
    throw Error(ErrorCode::DuplicateScene,
                "scene '" + rec.scene_id + "' already ingested with different content");
  }

  rec.ingested_at = now_utc();
  append_line(scene_to_json(rec).dump());
  scenes_.push_back(rec);
  if (inserted) *inserted = true;
  return rec;
}

std::vector<SceneRecord> Catalog::query_scenes(const BBox& bbox, int64_t t0,
                                               int64_t t1, Sensor sensor) const {
  if (t0 > t1) throw Error(ErrorCode::BadRequest, "time window has t0 > t1");
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<SceneRecord> out;
  for (const auto& s : scenes_) {
    if (s.sensor != sensor) continue;
    if (s.timestamp < t0 || s.timestamp > t1) continue;
    if (!intersects(s.footprint, bbox)) continue;
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const SceneRecord& a, const SceneRecord& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                      : a.scene_id < b.scene_id;
  });
  return out;
}

ProductRecord Catalog::register_product(const ProductSpec& spec) {
  ProductSpec pruned = spec;
  validate(pruned);

  ProductRecord rec;
  rec.name = pruned.name;
  rec.spec = std::move(pruned);
  rec.canonical_yaml = serialize_spec(rec.spec);
  rec.registered_at = now_utc();

  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& p : products_)
    if (p.name == rec.name)
      throw Error(ErrorCode::DuplicateProduct,
                  "product '" + rec.name + "' is already registered");

  ordered_json j;
  j["kind"] = "product";
  j["name"] = rec.name;
  j["registered_at"] = rec.registered_at;
  j["spec_yaml"] = rec.canonical_yaml;
  append_line(j.dump());
  products_.push_back(rec);
  return rec;
}

ProductRecord Catalog::register_product_text(const std::string& yaml_text,
                                             std::vector<std::string>* warnings) {
  ProductSpec spec;
  try {
    spec = parse_spec(yaml_text);
    std::vector<std::string> w = validate(spec);
    if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DuplicateProduct) throw;
    throw Error(ErrorCode::ValidationFailed, e.what(), e.details());
  }
  return register_product(spec);
}

std::optional<ProductRecord> Catalog::find_product(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& p : products_)
    if (p.name == name) return p;
  return std::nullopt;
}

std::optional<SceneRecord> Catalog::find_scene(const std::string& scene_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& s : scenes_)
    if (s.scene_id == scene_id) return s;
  return std::nullopt;
}

std::vector<SceneRecord> Catalog::scenes() const {
  std::lock_guard<std::mutex> lock(mu_);
  return scenes_;
}

std::vector<ProductRecord> Catalog::products() const {
  std::lock_guard<std::mutex> lock(mu_);
  return products_;
}

}  // namespace vcube
