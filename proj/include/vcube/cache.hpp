#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vcube/geo.hpp"
#include "vcube/raster.hpp"

namespace vcube {

struct Provenance {
  std::string product;  // product that first materialized the tile
  std::string node;
  TileId tile;
  std::vector<std::string> input_keys;
};

struct CacheEntry {
  std::string key;     // SHA-256 hex over the tile's full computational provenance
  uint64_t size = 0;   // payload file bytes
  std::string digest;  // SHA-256 of the payload file
  int64_t created_at = 0;
  Provenance provenance;
};

// Content-addressed tile store: payloads at <root>/<key[0:2]>/<key>.vras plus
// an index at <root>/index.jsonl. Identical keys imply identical values, so
// duplicate stores are harmless no-ops. Thread-safe.
class TileCache {
 public:
  explicit TileCache(std::filesystem::path root);

  bool contains(const std::string& key) const;

  // Digest-verified read. Returns nullopt on miss; a corrupt entry (payload
  // tampered, unreadable or missing) is evicted, reported through `corrupt`,
  // and also returns nullopt.
  std::optional<Raster> load(const std::string& key, bool* corrupt = nullptr);

  // Returns payload bytes written: 0 when the key was already present.
  uint64_t store(const std::string& key, const Raster& tile, const Provenance& prov);

  struct ProductUsage {
    uint64_t entries = 0;
    uint64_t bytes = 0;
  };
  struct Summary {
    uint64_t entries = 0;
    uint64_t bytes = 0;
    std::map<std::string, ProductUsage> per_product;
  };
  Summary stats() const;

  // Removes least-recently-created entries (ties by key) until total payload
  // bytes <= max_bytes. Returns the number of evicted entries.
  uint64_t evict(uint64_t max_bytes);

  const std::filesystem::path& root() const { return root_; }

 private:
  void load_index();
  void rewrite_index_locked();
  void append_index_locked(const CacheEntry& e);
  std::filesystem::path payload_path(const std::string& key) const;
  void drop_entry_locked(const std::string& key);

  std::filesystem::path root_;
  std::map<std::string, CacheEntry> entries_;
  mutable std::mutex mu_;
};

}  // namespace vcube
