#pragma once

#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "vcube/catalog.hpp"
#include "vcube/raster.hpp"

namespace vcube {

struct FetchLogEntry {
  std::string scene_id;
  std::string band;
  PixelWindow window;  // zero-sized for header-only reads
  uint64_t bytes = 0;  // payload bytes, plus the header the first time a file is touched
};

// Source-data access. Implementations must be safe for concurrent windowed
// reads. Byte accounting charges each file's header once and windowed reads
// for exactly their payload, which is what makes "fetch only what the request
// touches" measurable.
class Fetcher {
 public:
  virtual ~Fetcher() = default;

  // Grid geometry of a band file.
  VrasHeader header(const SceneRecord& scene, const std::string& band);

  // Exactly the requested pixel window. Any failure (unknown band, window out
  // of range, unreadable file) surfaces as FetchFailed.
  Raster fetch(const SceneRecord& scene, const std::string& band,
               const PixelWindow& window);

  uint64_t bytes_fetched() const;
  std::vector<FetchLogEntry> log() const;

 protected:
  virtual VrasHeader do_header(const SceneRecord& scene, const std::string& band) = 0;
  virtual Raster do_fetch(const SceneRecord& scene, const std::string& band,
                          const PixelWindow& window) = 0;

 private:
  uint64_t charge_header(const SceneRecord& scene, const std::string& band,
                         const VrasHeader& h);

  mutable std::mutex mu_;
  uint64_t bytes_ = 0;
  std::set<std::string> files_seen_;
  std::vector<FetchLogEntry> log_;
};

// Reads band files from the local paths recorded in the catalog, using
// seek-based windowed reads.
class LocalDirFetcher : public Fetcher {
 protected:
  VrasHeader do_header(const SceneRecord& scene, const std::string& band) override;
  Raster do_fetch(const SceneRecord& scene, const std::string& band,
                  const PixelWindow& window) override;

 private:
  static const std::string& band_path(const SceneRecord& scene,
                                      const std::string& band);
};

}  // namespace vcube
