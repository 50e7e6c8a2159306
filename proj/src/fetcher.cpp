#include "vcube/fetcher.hpp"

#include "vcube/error.hpp"

namespace vcube {

VrasHeader Fetcher::header(const SceneRecord& scene, const std::string& band) {
  VrasHeader h = do_header(scene, band);
  std::lock_guard<std::mutex> lock(mu_);
  uint64_t charged = charge_header(scene, band, h);
  if (charged > 0)
    log_.push_back({scene.scene_id, band, PixelWindow{}, charged});
  return h;
}

Raster Fetcher::fetch(const SceneRecord& scene, const std::string& band,
                      const PixelWindow& window) {
  Raster r = do_fetch(scene, band, window);
  uint64_t payload = window.pixel_count() * 4;

  bool first_touch;
  {
    std::lock_guard<std::mutex> lock(mu_);
    first_touch = !files_seen_.count(scene.scene_id + "/" + band);
  }

  // A file's first touch also pays for its header.
  uint64_t header_bytes = 0;
  if (first_touch) {
    VrasHeader h = do_header(scene, band);
    std::lock_guard<std::mutex> lock(mu_);
    header_bytes = charge_header(scene, band, h);
  }

  std::lock_guard<std::mutex> lock(mu_);
  bytes_ += payload;
  log_.push_back({scene.scene_id, band, window, payload + header_bytes});
  return r;
}

uint64_t Fetcher::charge_header(const SceneRecord& scene, const std::string& band,
                                const VrasHeader& h) {
  std::string key = scene.scene_id + "/" + band;
  if (!files_seen_.insert(key).second) return 0;
  bytes_ += h.header_bytes();
  return h.header_bytes();
}

uint64_t Fetcher::bytes_fetched() const {
  std::lock_guard<std::mutex> lock(mu_);
  return bytes_;
}

std::vector<FetchLogEntry> Fetcher::log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

const std::string& LocalDirFetcher::band_path(const SceneRecord& scene,
                                              const std::string& band) {
  auto it = scene.bands.find(band);
  if (it == scene.bands.end())
    throw Error(ErrorCode::FetchFailed,
                "scene '" + scene.scene_id + "' has no band '" + band + "'");
  return it->second;
}

VrasHeader LocalDirFetcher::do_header(const SceneRecord& scene,
                                      const std::string& band) {
  try {
    return read_vras_header(band_path(scene, band));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FetchFailed) throw;
    throw Error(ErrorCode::FetchFailed, std::string("header read failed: ") + e.what());
  }
}

Raster LocalDirFetcher::do_fetch(const SceneRecord& scene, const std::string& band,
                                 const PixelWindow& window) {
  try {
    return read_vras_window(band_path(scene, band), window);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FetchFailed) throw;
    throw Error(ErrorCode::FetchFailed,
                "window read failed for scene '" + scene.scene_id + "' band '" +
                    band + "': " + e.what());
  }
}

}  // namespace vcube
