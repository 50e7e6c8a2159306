#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcube/cache.hpp"
#include "vcube/catalog.hpp"
#include "vcube/fetcher.hpp"
#include "vcube/geo.hpp"
#include "vcube/pipeline.hpp"
#include "vcube/raster.hpp"

namespace vcube {

struct Request {
  std::string product;
  BBox bbox;
  int64_t t0 = 0;
  int64_t t1 = 0;
  // Required when the product contains a temporal-aggregate node and its
  // declaration doesn't pin them.
  std::optional<int64_t> center;
  std::optional<int64_t> half_window;
};

struct RunStats {
  uint64_t tiles_requested = 0;       // output-band tiles covered by the request
  uint64_t tiles_computed = 0;        // node tiles computed this run
  uint64_t tiles_from_cache = 0;      // node tiles served from verified cache
  uint64_t tiles_corrupt_evicted = 0; // cache entries that failed verification
  uint64_t scenes_fetched = 0;        // distinct scenes read from
  uint64_t bytes_fetched = 0;         // source payload bytes + one header per file
  uint64_t bytes_cached = 0;          // new cache payload bytes written this run
  double wall_time_s = 0.0;

  std::string to_json() const;  // stable field order
};

// Grid geometry of one node of the DAG (multilook coarsens it, everything
// else inherits its input's).
struct NodeGrid {
  uint32_t width = 0;
  uint32_t height = 0;
  GeoTransform transform;
  std::string crs;

  bool operator==(const NodeGrid&) const = default;
};

// One unit of work: produce one tile of one node (or fetch one source tile).
struct TileTask {
  std::string node_id;   // OpNode id; empty for source fetches
  bool leaf = false;
  size_t scene_index = 0;  // leaves: index into ExecutionPlan::scenes
  std::string band;        // leaves: band name
  TileId tile;
  PixelWindow window;  // pixels this task produces, on the node's grid
  std::string key;     // content-hash cache key
  // Producer tasks, grouped per input ref (kernel input order).
  std::vector<std::vector<size_t>> input_deps;

  std::vector<size_t> flat_deps() const {
    std::vector<size_t> out;
    for (const auto& g : input_deps) out.insert(out.end(), g.begin(), g.end());
    return out;
  }
};

struct OutputBinding {
  std::string band;          // output band name
  std::string node_id;       // producing node
  PixelWindow window;        // requested window on that node's grid
  std::vector<size_t> tasks; // output tile tasks
};

struct ExecutionPlan {
  std::string product;
  ProductSpec spec;  // temporal params resolved into node params
  std::vector<SceneRecord> scenes;  // matching scenes, (timestamp, id) order
  BBox bbox;
  NodeGrid source_grid;
  std::map<std::string, NodeGrid> node_grids;
  std::map<std::string, float> leaf_nodata;  // "scene_id/band" -> sentinel
  std::vector<TileTask> tasks;  // topologically ordered, deduplicated
  std::vector<OutputBinding> outputs;  // sorted by band name
};

// Resolves the request against the catalog into a tile-level task DAG with
// deterministic content-hash cache keys. Reads only band headers.
ExecutionPlan plan(const Catalog& catalog, const Request& request, Fetcher& fetcher);

struct ExecResult {
  std::map<std::string, Raster> outputs;  // band name -> raster cropped to bbox
  RunStats stats;
};

// Materializes the plan: serves node tiles from the verified cache where
// possible, computes (and caches) the rest, fetching source windows only for
// tiles that actually need computing. `jobs` sets worker-thread count;
// results are bit-identical for any value. `fetch_baseline` is the fetcher
// byte counter at the start of the request (defaults to the counter at entry;
// pass the pre-plan value so plan-time header reads are accounted).
ExecResult execute(const ExecutionPlan& plan, TileCache& cache, Fetcher& fetcher,
                   unsigned jobs = 1,
                   std::optional<uint64_t> fetch_baseline = std::nullopt);

// plan + execute.
ExecResult generate(const Catalog& catalog, const Request& request, TileCache& cache,
                    Fetcher& fetcher, unsigned jobs = 1);

}  // namespace vcube
