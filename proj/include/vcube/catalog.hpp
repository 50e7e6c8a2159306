#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vcube/geo.hpp"
#include "vcube/pipeline.hpp"
#include "vcube/sensor.hpp"

namespace vcube {

struct SceneRecord {
  std::string scene_id;
  Sensor sensor = Sensor::Optical;
  int64_t timestamp = 0;  // UTC seconds
  BBox footprint;
  std::string crs;
  std::map<std::string, std::string> bands;         // band name -> file path
  std::map<std::string, std::string> band_digests;  // band name -> SHA-256 hex
  int64_t ingested_at = 0;
};

struct ProductRecord {
  std::string name;
  ProductSpec spec;  // validated and pruned
  int64_t registered_at = 0;
  std::string canonical_yaml;
};

// Persistent index of ingested scenes and registered product specs. One
// JSON-lines file (kind-tagged records) plus the per-scene sidecars it was
// built from. Single writer, concurrent readers.
class Catalog {
 public:
  // Opens an existing catalog directory or creates an empty one.
  explicit Catalog(std::filesystem::path dir);

  // Parses the sidecar, verifies band files (existence, shared grid and CRS,
  // sensor-mandated band), digests them and appends the record. Idempotent:
  // re-ingesting identical content is a no-op returning the existing record;
  // `inserted` (when given) reports whether the index grew.
  SceneRecord ingest_scene(const std::filesystem::path& sidecar_path,
                           bool* inserted = nullptr);

  // Exactly the records whose footprint intersects bbox with timestamp in
  // [t0, t1] and matching sensor; sorted by (timestamp, scene_id).
  std::vector<SceneRecord> query_scenes(const BBox& bbox, int64_t t0, int64_t t1,
                                        Sensor sensor) const;

  ProductRecord register_product(const ProductSpec& spec);
  // Parse + validate + register; pipeline errors surface as ValidationFailed.
  // Validation warnings (pruned nodes) are appended to `warnings` when given.
  ProductRecord register_product_text(const std::string& yaml_text,
                                      std::vector<std::string>* warnings = nullptr);

  std::optional<ProductRecord> find_product(const std::string& name) const;
  std::optional<SceneRecord> find_scene(const std::string& scene_id) const;

  std::vector<SceneRecord> scenes() const;
  std::vector<ProductRecord> products() const;

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path index_path() const { return dir_ / "index.jsonl"; }

 private:
  void load();
  void append_line(const std::string& line);

  std::filesystem::path dir_;
  std::vector<SceneRecord> scenes_;
  std::vector<ProductRecord> products_;
  mutable std::mutex mu_;
};

}  // namespace vcube
