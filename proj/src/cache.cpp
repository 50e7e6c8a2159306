#include "vcube/cache.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "vcube/digest.hpp"
#include "vcube/error.hpp"

namespace vcube {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json entry_to_json(const CacheEntry& e) {
  ordered_json j;
  j["key"] = e.key;
  j["size"] = e.size;
  j["digest"] = e.digest;
  j["created_at"] = e.created_at;
  j["product"] = e.provenance.product;
  j["node"] = e.provenance.node;
  j["tile"] = {e.provenance.tile.col, e.provenance.tile.row};
  j["inputs"] = e.provenance.input_keys;
  return j;
}

CacheEntry entry_from_json(const ordered_json& j) {
  CacheEntry e;
  e.key = j.at("key").get<std::string>();
  e.size = j.at("size").get<uint64_t>();
  e.digest = j.at("digest").get<std::string>();
  e.created_at = j.at("created_at").get<int64_t>();
  e.provenance.product = j.at("product").get<std::string>();
  e.provenance.node = j.at("node").get<std::string>();
  e.provenance.tile = {j.at("tile")[0].get<uint32_t>(), j.at("tile")[1].get<uint32_t>()};
  e.provenance.input_keys = j.at("inputs").get<std::vector<std::string>>();
  return e;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TileCache::TileCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
  load_index();
}

void TileCache::load_index() {
  std::ifstream in(root_ / "index.jsonl");
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorCode::MalformedFile, "corrupt cache index line");
    CacheEntry e = entry_from_json(j);
    entries_[e.key] = std::move(e);
  }
}

std::filesystem::path TileCache::payload_path(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".vras");
}

void TileCache::append_index_locked(const CacheEntry& e) {
  std::ofstream out(root_ / "index.jsonl", std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot write cache index");
  out << entry_to_json(e).dump() << "\n";
}

void TileCache::rewrite_index_locked() {
  std::filesystem::path tmp = root_ / "index.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write cache index");
    for (const auto& [_, e] : entries_) out << entry_to_json(e).dump() << "\n";
  }
  std::filesystem::rename(tmp, root_ / "index.jsonl");
}

void TileCache::drop_entry_locked(const std::string& key) {
  std::error_code ec;
  std::filesystem::remove(payload_path(key), ec);
  entries_.erase(key);
  rewrite_index_locked();
}

bool TileCache::contains(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.count(key) > 0;
}

std::optional<Raster> TileCache::load(const std::string& key, bool* corrupt) {
  if (corrupt) *corrupt = false;
  std::string expected_digest;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    expected_digest = it->second.digest;
  }

  try {
    std::string bytes = read_file_bytes(payload_path(key));
    if (sha256_hex(bytes) != expected_digest)
      throw Error(ErrorCode::CacheCorrupt, "digest mismatch for " + key);
    return decode_vras(bytes);
  } catch (const std::exception&) {
    std::lock_guard<std::mutex> lock(mu_);
    if (entries_.count(key)) drop_entry_locked(key);
    if (corrupt) *corrupt = true;
    return std::nullopt;
  }
}

uint64_t TileCache::store(const std::string& key, const Raster& tile,
                          const Provenance& prov) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (entries_.count(key)) return 0;
  }

  std::string bytes = encode_vras(tile);

  CacheEntry e;
  e.key = key;
  e.size = bytes.size();
  e.digest = sha256_hex(bytes);
  e.created_at = int64_t(std::time(nullptr));
  e.provenance = prov;

  std::filesystem::path path = payload_path(key);
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write cache payload");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cache payload write failed");
  }
  std::filesystem::rename(tmp, path);

  std::lock_guard<std::mutex> lock(mu_);
  if (entries_.count(key)) return 0;  // raced store of the same content
  append_index_locked(e);
  entries_[key] = std::move(e);
  return bytes.size();
}

TileCache::Summary TileCache::stats() const {
  std::lock_guard<std::mutex> lock(mu_);
  Summary s;
  for (const auto& [_, e] : entries_) {
    s.entries += 1;
    s.bytes += e.size;
    auto& pu = s.per_product[e.provenance.product];
    pu.entries += 1;
    pu.bytes += e.size;
  }
  return s;
}

uint64_t TileCache::evict(uint64_t max_bytes) {
  std::lock_guard<std::mutex> lock(mu_);
  uint64_t total = 0;
  for (const auto& [_, e] : entries_) total += e.size;
  if (total <= max_bytes) return 0;

  std::vector<const CacheEntry*> order;
  order.reserve(entries_.size());
  for (const auto& [_, e] : entries_) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const CacheEntry* a, const CacheEntry* b) {
    return a->created_at != b->created_at ? a->created_at < b->created_at
                                          : a->key < b->key;
  });

  uint64_t evicted = 0;
  std::vector<std::string> victims;
  for (const CacheEntry* e : order) {
    if (total <= max_bytes) break;
    total -= e->size;
    victims.push_back(e->key);
    ++evicted;
  }
  for (const auto& key : victims) {
    std::error_code ec;
    std::filesystem::remove(payload_path(key), ec);
    entries_.erase(key);
  }
  rewrite_index_locked();
  return evicted;
}

}  // namespace vcube
