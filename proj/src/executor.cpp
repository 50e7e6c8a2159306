#include "vcube/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <set>
#include <thread>

#include <json.hpp>

#include "vcube/digest.hpp"
#include "vcube/error.hpp"
#include "vcube/ops.hpp"
#include "vcube/version.hpp"

namespace vcube {

using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<TileId> tiles_covering(const NodeGrid& grid, const PixelWindow& w) {
  std::vector<TileId> out;
  uint32_t tc0 = uint32_t(w.col0 / kTileSize);
  uint32_t tc1 = uint32_t((w.col_end() - 1) / kTileSize);
  uint32_t tr0 = uint32_t(w.row0 / kTileSize);
  uint32_t tr1 = uint32_t((w.row_end() - 1) / kTileSize);
  (void)grid;
  for (uint32_t tr = tr0; tr <= tr1; ++tr)
    for (uint32_t tc = tc0; tc <= tc1; ++tc) out.push_back(TileId{tc, tr});
  return out;
}

// Input pixels a node needs in order to produce `out_w` on its own grid.
PixelWindow required_input_window(const OpSignature& sig, const OpNode& node,
                                  const PixelWindow& out_w, const NodeGrid& in_grid) {
  if (sig.name == "multilook") {
    int64_t f = std::get<int64_t>(node.params.at("factor"));
    int64_t c0 = out_w.col0 * f;
    int64_t r0 = out_w.row0 * f;
    int64_t c1 = std::min<int64_t>(out_w.col_end() * f, in_grid.width);
    int64_t r1 = std::min<int64_t>(out_w.row_end() * f, in_grid.height);
    return PixelWindow{c0, r0, uint32_t(c1 - c0), uint32_t(r1 - r0)};
  }
  if (sig.name == "lee_filter") {
    int64_t radius = std::get<int64_t>(node.params.at("window")) / 2;
    int64_t c0 = std::max<int64_t>(0, out_w.col0 - radius);
    int64_t r0 = std::max<int64_t>(0, out_w.row0 - radius);
    int64_t c1 = std::min<int64_t>(in_grid.width, out_w.col_end() + radius);
    int64_t r1 = std::min<int64_t>(in_grid.height, out_w.row_end() + radius);
    return PixelWindow{c0, r0, uint32_t(c1 - c0), uint32_t(r1 - r0)};
  }
  return out_w;
}

NodeGrid derive_grid(const OpSignature& sig, const OpNode& node,
                     const std::vector<NodeGrid>& input_grids) {
  for (size_t i = 1; i < input_grids.size(); ++i)
    if (!(input_grids[i] == input_grids[0]))
      throw Error(ErrorCode::GridMismatch,
                  "inputs of node '" + node.id + "' are not co-registered");
  NodeGrid g = input_grids.at(0);
  if (sig.name == "multilook") {
    int64_t f = std::get<int64_t>(node.params.at("factor"));
    g.width = uint32_t((g.width + f - 1) / f);
    g.height = uint32_t((g.height + f - 1) / f);
    g.transform.pixel_w *= double(f);
    g.transform.pixel_h *= double(f);
  }
  return g;
}

ordered_json window_json(const PixelWindow& w) {
  return {w.col0, w.row0, w.width, w.height};
}

ordered_json grid_json(const NodeGrid& g) {
  return {g.width,
          g.height,
          g.transform.origin_x,
          g.transform.origin_y,
          g.transform.pixel_w,
          g.transform.pixel_h,
          g.crs};
}

std::string leaf_key(const SceneRecord& scene, const std::string& band,
                     const std::string& digest, const PixelWindow& w,
                     const NodeGrid& grid, TileId tile) {
  ordered_json j;
  j["engine"] = kEngineVersion;
  j["fetch"] = {{"scene", scene.scene_id},
                {"band", band},
                {"digest", digest},
                {"grid", grid_json(grid)}};
  j["inputs_sorted"] = ordered_json::array();
  j["tile"] = {tile.col, tile.row};
  j["window"] = window_json(w);
  return sha256_hex(j.dump());
}

std::string node_key(const OpNode& node, const std::vector<std::vector<std::string>>& input_keys,
                     TileId tile, const PixelWindow& w) {
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : node.params)
    params[k] = std::string(param_type_name(param_type_of(v))) + ":" +
                param_to_string(v);

  std::vector<std::string> sorted;
  for (const auto& g : input_keys) sorted.insert(sorted.end(), g.begin(), g.end());
  std::sort(sorted.begin(), sorted.end());

  ordered_json j;
  j["engine"] = kEngineVersion;
  j["node"] = {{"op", node.op}, {"params", params}, {"inputs", input_keys}};
  j["inputs_sorted"] = sorted;
  j["tile"] = {tile.col, tile.row};
  j["window"] = window_json(w);
  return sha256_hex(j.dump());
}

struct PlanBuilder {
  ExecutionPlan& p;
  Fetcher& fetcher;
  const OpRegistry& registry = OpRegistry::instance();
  std::map<std::string, size_t> memo = {};

  float leaf_nodata(size_t scene_index, const std::string& band) {
    const SceneRecord& scene = p.scenes[scene_index];
    std::string key = scene.scene_id + "/" + band;
    auto it = p.leaf_nodata.find(key);
    if (it != p.leaf_nodata.end()) return it->second;
    VrasHeader h = fetcher.header(scene, band);
    if (h.width != p.source_grid.width || h.height != p.source_grid.height ||
        h.transform != p.source_grid.transform || h.crs != p.source_grid.crs)
      throw Error(ErrorCode::GridMismatch,
                  "band file '" + band + "' of scene '" + scene.scene_id +
                      "' is not on the scene grid");
    p.leaf_nodata.emplace(key, h.nodata);
    return h.nodata;
  }

  size_t leaf_task(size_t scene_index, const std::string& band, TileId tile) {
    const SceneRecord& scene = p.scenes[scene_index];
    std::string mkey = "l:" + scene.scene_id + ":" + band + ":" +
                       std::to_string(tile.col) + ":" + std::to_string(tile.row);
    auto it = memo.find(mkey);
    if (it != memo.end()) return it->second;

    if (!scene.bands.count(band))
      throw Error(ErrorCode::MissingBand,
                  "scene '" + scene.scene_id + "' has no band '" + band + "'");
    leaf_nodata(scene_index, band);

    TileTask t;
    t.leaf = true;
    t.scene_index = scene_index;
    t.band = band;
    t.tile = tile;
    t.window = tile_window(p.source_grid.width, p.source_grid.height, tile);
    t.key = leaf_key(scene, band, scene.band_digests.at(band), t.window,
                     p.source_grid, tile);
    p.tasks.push_back(std::move(t));
    memo.emplace(mkey, p.tasks.size() - 1);
    return p.tasks.size() - 1;
  }

  size_t node_task(const std::string& node_id, TileId tile) {
    std::string mkey = "n:" + node_id + ":" + std::to_string(tile.col) + ":" +
                       std::to_string(tile.row);
    auto it = memo.find(mkey);
    if (it != memo.end()) return it->second;

    const OpNode* node = p.spec.find_node(node_id);
    const OpSignature* sig = registry.find(node->op);
    const NodeGrid& grid = p.node_grids.at(node_id);
    PixelWindow window = tile_window(grid.width, grid.height, tile);

    std::vector<std::vector<size_t>> input_deps;
    std::vector<std::vector<std::string>> input_keys;

    if (sig->temporal) {
      // One tile of the band plus its mask, across every matching date.
      const std::string& band = node->inputs.at(0).name;
      std::vector<size_t> group;
      for (size_t d = 0; d < p.scenes.size(); ++d) {
        group.push_back(leaf_task(d, band, tile));
        group.push_back(leaf_task(d, "MASK", tile));
      }
      std::vector<std::string> keys;
      for (size_t dep : group) keys.push_back(p.tasks[dep].key);
      input_deps.push_back(std::move(group));
      input_keys.push_back(std::move(keys));
    } else {
      for (const auto& in : node->inputs) {
        const NodeGrid& in_grid = in.kind == InputRef::Kind::Band
                                      ? p.source_grid
                                      : p.node_grids.at(in.name);
        PixelWindow in_w = required_input_window(*sig, *node, window, in_grid);
        std::vector<size_t> group;
        for (TileId dep_tile : tiles_covering(in_grid, in_w)) {
          group.push_back(in.kind == InputRef::Kind::Band
                              ? leaf_task(0, in.name, dep_tile)
                              : node_task(in.name, dep_tile));
        }
        std::vector<std::string> keys;
        for (size_t dep : group) keys.push_back(p.tasks[dep].key);
        input_deps.push_back(std::move(group));
        input_keys.push_back(std::move(keys));
      }
    }

    TileTask t;
    t.node_id = node_id;
    t.tile = tile;
    t.window = window;
    t.key = node_key(*node, input_keys, tile, window);
    t.input_deps = std::move(input_deps);
    p.tasks.push_back(std::move(t));
    memo.emplace(mkey, p.tasks.size() - 1);
    return p.tasks.size() - 1;
  }
};

}  // namespace

std::string RunStats::to_json() const {
  ordered_json j;
  j["tiles_requested"] = tiles_requested;
  j["tiles_computed"] = tiles_computed;
  j["tiles_from_cache"] = tiles_from_cache;
  j["tiles_corrupt_evicted"] = tiles_corrupt_evicted;
  j["scenes_fetched"] = scenes_fetched;
  j["bytes_fetched"] = bytes_fetched;
  j["bytes_cached"] = bytes_cached;
  j["wall_time_s"] = wall_time_s;
  return j.dump();
}

ExecutionPlan plan(const Catalog& catalog, const Request& request, Fetcher& fetcher) {
  auto record = catalog.find_product(request.product);
  if (!record)
    throw Error(ErrorCode::UnknownProduct,
                "product '" + request.product + "' is not registered");
  if (!request.bbox.valid())
    throw Error(ErrorCode::BadRequest, "request bbox is not a valid box");
  if (request.t0 > request.t1)
    throw Error(ErrorCode::BadRequest, "time window has t0 > t1");

  ExecutionPlan p;
  p.product = record->name;
  p.spec = record->spec;
  p.bbox = request.bbox;

  p.scenes =
      catalog.query_scenes(request.bbox, request.t0, request.t1, p.spec.sensor);
  if (p.scenes.empty())
    throw Error(ErrorCode::NoScenes, "no scenes match the request");

  const auto& registry = OpRegistry::instance();

  bool temporal = false;
  for (auto& node : p.spec.nodes) {
    const OpSignature* sig = registry.find(node.op);
    if (!sig->temporal) continue;
    temporal = true;
    // The request wins over values pinned in the declaration.
    if (request.center) node.params["center"] = *request.center;
    if (request.half_window) node.params["half_window"] = *request.half_window;
    if (!node.params.count("center") || !node.params.count("half_window"))
      throw Error(ErrorCode::MissingSynthesisParams,
                  "product '" + p.product +
                      "' aggregates over time; supply center and half_window");
    if (std::get<int64_t>(node.params.at("half_window")) <= 0)
      throw Error(ErrorCode::BadRequest, "half_window must be > 0");
  }

  if (temporal) {
    for (size_t i = 1; i < p.scenes.size(); ++i)
      if (p.scenes[i].timestamp == p.scenes[i - 1].timestamp)
        throw Error(ErrorCode::BadRequest,
                    "scenes '" + p.scenes[i - 1].scene_id + "' and '" +
                        p.scenes[i].scene_id +
                        "' share a timestamp; the synthesis stack needs "
                        "distinct dates");
  }

  // Every matching scene must sit on one shared grid (the engine never
  // resamples). The grid is defined by the first scene in query order.
  for (size_t i = 0; i < p.scenes.size(); ++i) {
    const SceneRecord& s = p.scenes[i];
    VrasHeader h = fetcher.header(s, s.bands.begin()->first);
    NodeGrid g{h.width, h.height, h.transform, h.crs};
    if (i == 0) {
      p.source_grid = g;
    } else if (!(g == p.source_grid)) {
      throw Error(ErrorCode::GridMismatch,
                  "scene '" + s.scene_id + "' is on a different grid than '" +
                      p.scenes[0].scene_id + "'");
    }
  }

  for (const auto& id : topo_order(p.spec)) {
    const OpNode* node = p.spec.find_node(id);
    const OpSignature* sig = registry.find(node->op);
    std::vector<NodeGrid> igrids;
    if (sig->temporal) {
      igrids.push_back(p.source_grid);
    } else {
      for (const auto& in : node->inputs)
        igrids.push_back(in.kind == InputRef::Kind::Band ? p.source_grid
                                                         : p.node_grids.at(in.name));
    }
    p.node_grids.emplace(id, derive_grid(*sig, *node, igrids));
  }

  PlanBuilder builder{p, fetcher};
  for (const auto& [band, node_id] : p.spec.outputs) {
    const NodeGrid& grid = p.node_grids.at(node_id);
    OutputBinding binding;
    binding.band = band;
    binding.node_id = node_id;
    binding.window =
        crop_window(grid.width, grid.height, grid.transform, request.bbox);
    for (TileId tile : tiles_covering(grid, binding.window))
      binding.tasks.push_back(builder.node_task(node_id, tile));
    p.outputs.push_back(std::move(binding));
  }

  return p;
}

namespace {

struct Runner {
  const ExecutionPlan& plan;
  TileCache& cache;
  Fetcher& fetcher;
  std::vector<std::optional<Raster>>& results;

  std::mutex mu{};
  std::set<std::string> scenes_touched{};
  std::atomic<uint64_t> computed{0};
  std::atomic<uint64_t> cached_bytes{0};

  void run_task(size_t i) {
    const TileTask& t = plan.tasks[i];
    if (t.leaf) {
      Raster r = fetcher.fetch(plan.scenes[t.scene_index], t.band, t.window);
      {
        std::lock_guard<std::mutex> lock(mu);
        scenes_touched.insert(plan.scenes[t.scene_index].scene_id);
      }
      results[i] = std::move(r);
      return;
    }

    const OpNode* node = plan.spec.find_node(t.node_id);
    const OpSignature* sig = OpRegistry::instance().find(node->op);
    Raster out;

    if (sig->temporal) {
      TimeStack stack;
      const auto& group = t.input_deps.at(0);
      for (size_t j = 0; j + 1 < group.size(); j += 2) {
        TimeStack::Slice slice;
        slice.timestamp = plan.scenes[plan.tasks[group[j]].scene_index].timestamp;
        slice.data = *results[group[j]];
        slice.mask = *results[group[j + 1]];
        stack.slices.push_back(std::move(slice));
      }
      out = temporal_synthesis(stack, std::get<int64_t>(node->params.at("center")),
                               std::get<int64_t>(node->params.at("half_window")));
    } else {
      std::vector<Raster> inputs;
      PixelWindow first_in_w;
      for (size_t k = 0; k < node->inputs.size(); ++k) {
        const InputRef& in = node->inputs[k];
        const NodeGrid& in_grid = in.kind == InputRef::Kind::Band
                                      ? plan.source_grid
                                      : plan.node_grids.at(in.name);
        PixelWindow in_w = required_input_window(*sig, *node, t.window, in_grid);
        if (k == 0) first_in_w = in_w;

        const auto& deps = t.input_deps.at(k);
        float nodata = results[deps.at(0)]->nodata;
        Raster buf = Raster::filled(in_w.width, in_w.height,
                                    window_transform(in_grid.transform, in_w),
                                    in_grid.crs, nodata, nodata);
        for (size_t dep : deps)
          blit(*results[dep], plan.tasks[dep].window, buf, in_w);
        inputs.push_back(std::move(buf));
      }
      out = sig->kernel(inputs, node->params);
      if (sig->name == "lee_filter") {
        // Strip the halo that was only there to make border windows exact.
        PixelWindow rel{t.window.col0 - first_in_w.col0,
                        t.window.row0 - first_in_w.row0, t.window.width,
                        t.window.height};
        out = extract(out, rel);
      }
    }

    Provenance prov;
    prov.product = plan.product;
    prov.node = t.node_id;
    prov.tile = t.tile;
    for (const auto& group : t.input_deps)
      for (size_t dep : group) prov.input_keys.push_back(plan.tasks[dep].key);

    cached_bytes += cache.store(t.key, out, prov);
    computed += 1;
    results[i] = std::move(out);
  }
};

}  // namespace

ExecResult execute(const ExecutionPlan& plan, TileCache& cache, Fetcher& fetcher,
                   unsigned jobs, std::optional<uint64_t> fetch_baseline) {
  auto t_start = std::chrono::steady_clock::now();
  uint64_t fetch_bytes_start = fetch_baseline.value_or(fetcher.bytes_fetched());

  ExecResult result;
  RunStats& stats = result.stats;
  const size_t n = plan.tasks.size();

  std::vector<std::optional<Raster>> results(n);
  std::vector<char> needed(n, 0), to_compute(n, 0);

  std::set<size_t> output_tasks;
  for (const auto& binding : plan.outputs) {
    stats.tiles_requested += binding.tasks.size();
    output_tasks.insert(binding.tasks.begin(), binding.tasks.end());
  }

  // Walk consumers before producers: a verified cache hit prunes its whole
  // subtree, which is what keeps warm runs fetch-free.
  for (size_t i = n; i-- > 0;) {
    if (output_tasks.count(i)) needed[i] = 1;
    if (!needed[i]) continue;
    const TileTask& t = plan.tasks[i];
    if (!t.leaf) {
      bool corrupt = false;
      auto hit = cache.load(t.key, &corrupt);
      if (corrupt) stats.tiles_corrupt_evicted += 1;
      if (hit) {
        results[i] = std::move(*hit);
        stats.tiles_from_cache += 1;
        continue;
      }
    }
    to_compute[i] = 1;
    for (size_t d : t.flat_deps()) needed[d] = 1;
  }

  std::vector<size_t> todo;
  for (size_t i = 0; i < n; ++i)
    if (to_compute[i]) todo.push_back(i);

  Runner runner{plan, cache, fetcher, results};

  if (jobs <= 1 || todo.size() <= 1) {
    for (size_t i : todo) runner.run_task(i);
  } else {
    std::vector<size_t> remaining(n, 0);
    std::vector<std::vector<size_t>> dependents(n);
    for (size_t i : todo)
      for (size_t d : plan.tasks[i].flat_deps())
        if (to_compute[d]) {
          remaining[i] += 1;
          dependents[d].push_back(i);
        }

    std::deque<size_t> ready;
    for (size_t i : todo)
      if (remaining[i] == 0) ready.push_back(i);

    std::mutex qmu;
    std::condition_variable qcv;
    size_t done = 0;
    std::exception_ptr first_error;
    bool abort = false;

    auto worker = [&]() {
      std::unique_lock<std::mutex> lock(qmu);
      for (;;) {
        qcv.wait(lock, [&] { return abort || !ready.empty() || done == todo.size(); });
        if (abort || done == todo.size()) return;
        size_t i = ready.front();
        ready.pop_front();
        lock.unlock();

        try {
          runner.run_task(i);
        } catch (...) {
          lock.lock();
          if (!first_error) first_error = std::current_exception();
          abort = true;
          qcv.notify_all();
          return;
        }

        lock.lock();
        done += 1;
        for (size_t dep : dependents[i])
          if (--remaining[dep] == 0) ready.push_back(dep);
        qcv.notify_all();
      }
    };

    unsigned count = unsigned(std::min<size_t>(jobs, todo.size()));
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (unsigned j = 0; j < count; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  stats.tiles_computed = runner.computed.load();
  stats.bytes_cached = runner.cached_bytes.load();
  stats.scenes_fetched = runner.scenes_touched.size();
  stats.bytes_fetched = fetcher.bytes_fetched() - fetch_bytes_start;

  for (const auto& binding : plan.outputs) {
    const NodeGrid& grid = plan.node_grids.at(binding.node_id);
    float nodata = results[binding.tasks.at(0)]->nodata;
    Raster out = Raster::filled(binding.window.width, binding.window.height,
                                window_transform(grid.transform, binding.window),
                                grid.crs, nodata, nodata);
    for (size_t task : binding.tasks)
      blit(*results[task], plan.tasks[task].window, out, binding.window);
    result.outputs.emplace(binding.band, std::move(out));
  }

  stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

ExecResult generate(const Catalog& catalog, const Request& request, TileCache& cache,
                    Fetcher& fetcher, unsigned jobs) {
  uint64_t baseline = fetcher.bytes_fetched();
  ExecutionPlan p = plan(catalog, request, fetcher);
  return execute(p, cache, fetcher, jobs, baseline);
}

}  // namespace vcube
