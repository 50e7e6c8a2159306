#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "vcube/error.hpp"
#include "vcube/pipeline.hpp"

using namespace vcube;
using testutil::error_code_of;

namespace {

const char* kNdviYaml = R"(name: ndvi
sensor: OPTICAL
nodes:
  - id: n1
    op: band_index
    params: { index: NDVI }
    inputs: [band:B08, band:B04]
outputs:
  ndvi: n1
)";

}  // namespace

TEST_CASE("parses the canonical NDVI declaration") {
  ProductSpec spec = parse_spec(kNdviYaml);
  CHECK(spec.name == "ndvi");
  CHECK(spec.sensor == Sensor::Optical);
  REQUIRE(spec.nodes.size() == 1);
  CHECK(spec.nodes[0].op == "band_index");
  CHECK(spec.nodes[0].inputs.size() == 2);
  CHECK(spec.outputs.at("ndvi") == "n1");
  CHECK_FALSE(spec.has_temporal_node());
}

TEST_CASE("two-node cycle is reported with its node ids") {
  const char* text = R"(name: c
sensor: SAR
nodes:
  - id: a
    op: to_db
    inputs: [node:b]
  - id: b
    op: from_db
    inputs: [node:a]
outputs:
  o: b
)";
  try {
    parse_spec(text);
    FAIL("expected CycleDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CycleDetected);
    CHECK(e.details() == std::vector<std::string>{"a", "b"});
  }
}

TEST_CASE("unknown op") {
  const char* text = R"(name: x
sensor: OPTICAL
nodes:
  - id: n1
    op: sharpen
    inputs: [band:B04]
outputs:
  o: n1
)";
  CHECK(error_code_of([&] { parse_spec(text); }) == ErrorCode::UnknownOp);
}

TEST_CASE("parse rejections carry the right codes") {
  auto code = [](const std::string& text) {
    return error_code_of([&] { parse_spec(text); });
  };

  SUBCASE("malformed yaml") {
    CHECK(code("::\n  - {") == ErrorCode::SyntaxError);
    CHECK(code("just a scalar") == ErrorCode::SyntaxError);
    CHECK(code("") == ErrorCode::SyntaxError);
  }

  SUBCASE("unknown param") {
    CHECK(code(R"(name: x
sensor: OPTICAL
nodes:
  - id: n1
    op: band_index
    params: { index: NDVI, gain: 2 }
    inputs: [band:B08, band:B04]
outputs: {o: n1}
)") == ErrorCode::UnknownParam);
  }

  SUBCASE("missing required param") {
    CHECK(code(R"(name: x
sensor: OPTICAL
nodes:
  - id: n1
    op: band_index
    inputs: [band:B08, band:B04]
outputs: {o: n1}
)") == ErrorCode::UnknownParam);
  }

  SUBCASE("bad param type") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: multilook
    params: { factor: fast }
    inputs: [band:VV]
outputs: {o: n1}
)") == ErrorCode::UnknownParam);
  }

  SUBCASE("param outside its domain") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: lee_filter
    params: { window: 4, looks: 1.0 }
    inputs: [band:VV]
outputs: {o: n1}
)") == ErrorCode::UnknownParam);
  }

  SUBCASE("arity mismatch") {
    CHECK(code(R"(name: x
sensor: OPTICAL
nodes:
  - id: n1
    op: band_index
    params: { index: NDVI }
    inputs: [band:B08]
outputs: {o: n1}
)") == ErrorCode::ArityMismatch);
  }

  SUBCASE("dangling node reference") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: to_db
    inputs: [node:ghost]
outputs: {o: n1}
)") == ErrorCode::DanglingRef);
  }

  SUBCASE("band the sensor does not provide") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: to_db
    inputs: [band:B04]
outputs: {o: n1}
)") == ErrorCode::DanglingRef);
  }

  SUBCASE("output referencing an undefined node") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: to_db
    inputs: [band:VV]
outputs: {o: n2}
)") == ErrorCode::DanglingRef);
  }

  SUBCASE("duplicate node ids") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: to_db
    inputs: [band:VV]
  - id: n1
    op: from_db
    inputs: [band:VV]
outputs: {o: n1}
)") == ErrorCode::SyntaxError);
  }

  SUBCASE("temporal op under a SAR sensor") {
    CHECK(code(R"(name: x
sensor: SAR
nodes:
  - id: n1
    op: temporal_synthesis
    inputs: [band:VV]
outputs: {o: n1}
)") == ErrorCode::DanglingRef);
  }
}

TEST_CASE("parsing is total over arbitrary bytes") {
  std::mt19937_64 rng(201);
  std::uniform_int_distribution<int> len(0, 400);
  std::uniform_int_distribution<int> byte(0, 255);

  for (int iter = 0; iter < 200; ++iter) {
    std::string text;
    int n = len(rng);
    for (int i = 0; i < n; ++i) text.push_back(char(byte(rng)));
    try {
      parse_spec(text);
    } catch (const Error&) {
      // any typed error is acceptable; crashes and foreign exceptions are not
    }
  }

  // Single-byte mutations of a valid document.
  std::string base = kNdviYaml;
  std::uniform_int_distribution<size_t> pos(0, base.size() - 1);
  for (int iter = 0; iter < 300; ++iter) {
    std::string text = base;
    text[pos(rng)] = char(byte(rng));
    try {
      parse_spec(text);
    } catch (const Error&) {
    }
  }
}

TEST_CASE("validate prunes unreachable nodes with a warning") {
  const char* text = R"(name: x
sensor: SAR
nodes:
  - id: used
    op: to_db
    inputs: [band:VV]
  - id: unused
    op: from_db
    inputs: [band:VV]
outputs:
  o: used
)";
  ProductSpec spec = parse_spec(text);
  auto warnings = validate(spec);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("unused") != std::string::npos);
  CHECK(spec.nodes.size() == 1);
  CHECK(spec.nodes[0].id == "used");

  ProductSpec full = parse_spec(kNdviYaml);
  CHECK(validate(full).empty());
}

TEST_CASE("topological order is deterministic") {
  SUBCASE("chain") {
    ProductSpec spec = parse_spec(R"(name: x
sensor: SAR
nodes:
  - id: c
    op: to_db
    inputs: [node:b]
  - id: b
    op: to_db
    inputs: [node:a]
  - id: a
    op: to_db
    inputs: [band:VV]
outputs: {o: c}
)");
    CHECK(topo_order(spec) == std::vector<std::string>{"a", "b", "c"});
  }

  SUBCASE("diamond breaks ties lexicographically") {
    ProductSpec spec = parse_spec(R"(name: x
sensor: SAR
nodes:
  - id: d
    op: calibrate_sigma0
    inputs: [node:c, node:b]
  - id: c
    op: from_db
    inputs: [node:a]
  - id: b
    op: to_db
    inputs: [node:a]
  - id: a
    op: to_db
    inputs: [band:VV]
outputs: {o: d}
)");
    CHECK(topo_order(spec) == std::vector<std::string>{"a", "b", "c", "d"});
  }

  SUBCASE("single node") {
    ProductSpec spec = parse_spec(kNdviYaml);
    CHECK(topo_order(spec) == std::vector<std::string>{"n1"});
  }
}

TEST_CASE("DOT rendering is golden-stable") {
  SUBCASE("one node, no edges") {
    ProductSpec spec = parse_spec(kNdviYaml);
    CHECK(render_dot(spec) == "digraph \"ndvi\" {\n"
                              "  \"n1\" [label=\"n1\\nband_index\"];\n"
                              "}\n");
  }

  SUBCASE("chain has exactly one edge") {
    ProductSpec spec = parse_spec(R"(name: chain
sensor: SAR
nodes:
  - id: a
    op: to_db
    inputs: [band:VV]
  - id: b
    op: from_db
    inputs: [node:a]
outputs: {o: b}
)");
    CHECK(render_dot(spec) == "digraph \"chain\" {\n"
                              "  \"a\" [label=\"a\\nto_db\"];\n"
                              "  \"b\" [label=\"b\\nfrom_db\"];\n"
                              "  \"a\" -> \"b\";\n"
                              "}\n");
  }

  SUBCASE("diamond has four nodes and four edges") {
    ProductSpec spec = parse_spec(R"(name: diamond
sensor: SAR
nodes:
  - id: a
    op: to_db
    inputs: [band:VV]
  - id: b
    op: to_db
    inputs: [node:a]
  - id: c
    op: from_db
    inputs: [node:a]
  - id: d
    op: calibrate_sigma0
    inputs: [node:b, node:c]
outputs: {o: d}
)");
    std::string dot = render_dot(spec);
    CHECK(std::count(dot.begin(), dot.end(), '[') == 4);
    CHECK(dot.find("\"a\" -> \"b\";") != std::string::npos);
    CHECK(dot.find("\"a\" -> \"c\";") != std::string::npos);
    CHECK(dot.find("\"b\" -> \"d\";") != std::string::npos);
    CHECK(dot.find("\"c\" -> \"d\";") != std::string::npos);
  }
}

TEST_CASE("serialize/parse reaches a fixed point and preserves param types") {
  const char* text = R"(name: sar-chain
sensor: SAR
nodes:
  - id: z_last
    op: to_db
    inputs: [node:lee]
  - id: lee
    op: lee_filter
    params: { window: 5, looks: 2.5 }
    inputs: [node:ml]
  - id: ml
    op: multilook
    params: { factor: 2 }
    inputs: [node:cal]
  - id: cal
    op: calibrate_sigma0
    inputs: [band:VV, band:CAL_A]
outputs:
  db: z_last
)";
  ProductSpec s1 = parse_spec(text);
  std::string y1 = serialize_spec(s1);
  ProductSpec s2 = parse_spec(y1);
  std::string y2 = serialize_spec(s2);
  CHECK(y1 == y2);
  CHECK(parse_spec(y2) == s2);

  const OpNode* lee = s2.find_node("lee");
  REQUIRE(lee != nullptr);
  CHECK(std::get<int64_t>(lee->params.at("window")) == 5);
  CHECK(std::get<double>(lee->params.at("looks")) == 2.5);
  const OpNode* ml = s2.find_node("ml");
  CHECK(std::get<int64_t>(ml->params.at("factor")) == 2);
}

// --- random DAG properties ------------------------------------------------------

namespace {

// Emits a YAML product document for a random DAG built over a total order, so
// acceptance of the generated text exercises the real parser.
struct RandomDag {
  std::vector<std::string> ids;
  std::vector<std::string> ops;
  std::vector<std::vector<std::string>> inputs;  // ref strings
  std::vector<std::string> params;               // inline params text or ""

  std::string to_yaml() const {
    std::ostringstream out;
    out << "name: rnd\nsensor: OPTICAL\nnodes:\n";
    for (size_t i = 0; i < ids.size(); ++i) {
      out << "  - id: " << ids[i] << "\n    op: " << ops[i] << "\n";
      if (!params[i].empty()) out << "    params: " << params[i] << "\n";
      out << "    inputs: [";
      for (size_t k = 0; k < inputs[i].size(); ++k) {
        if (k) out << ", ";
        out << inputs[i][k];
      }
      out << "]\n";
    }
    out << "outputs:\n";
    // every sink is an output, so no node is prunable
    std::set<std::string> consumed;
    for (const auto& ins : inputs)
      for (const auto& ref : ins)
        if (ref.rfind("node:", 0) == 0) consumed.insert(ref.substr(5));
    int oi = 0;
    for (const auto& id : ids)
      if (!consumed.count(id)) out << "  out" << oi++ << ": " << id << "\n";
    return out.str();
  }
};

RandomDag make_random_dag(std::mt19937_64& rng, int max_nodes = 12) {
  std::uniform_int_distribution<int> ncount(1, max_nodes);
  std::uniform_int_distribution<int> arity_die(1, 3);
  std::uniform_int_distribution<int> pick(0, 1 << 20);

  int n = ncount(rng);
  RandomDag dag;
  for (int i = 0; i < n; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "n%02d", i);
    dag.ids.push_back(buf);
  }
  dag.ops.resize(n);
  dag.inputs.resize(n);
  dag.params.resize(n);

  const std::vector<std::string> bands2 = {"NDVI", "NDWI", "NBR", "MSAVI", "ARI"};
  const std::vector<std::string> bands3 = {"EVI", "MCARI", "SIPI"};
  const std::vector<std::string> unary_band = {"B02", "B03", "B04", "B08"};

  for (int i = 0; i < n; ++i) {
    int arity = arity_die(rng);
    auto ref = [&](int) -> std::string {
      // earlier node or source band
      if (i > 0 && pick(rng) % 2 == 0) {
        int j = pick(rng) % i;
        return "node:" + dag.ids[j];
      }
      return "band:" + unary_band[pick(rng) % unary_band.size()];
    };
    if (arity == 1) {
      dag.ops[i] = (pick(rng) % 2) ? "to_db" : "from_db";
      dag.inputs[i] = {ref(0)};
    } else if (arity == 2) {
      dag.ops[i] = "band_index";
      dag.params[i] = "{ index: " + bands2[pick(rng) % bands2.size()] + " }";
      dag.inputs[i] = {ref(0), ref(1)};
    } else {
      dag.ops[i] = "band_index";
      dag.params[i] = "{ index: " + bands3[pick(rng) % bands3.size()] + " }";
      dag.inputs[i] = {ref(0), ref(1), ref(2)};
    }
  }
  return dag;
}

// Rewires one input to close a cycle: if any node b consumes node a, point one
// of a's inputs back at b; otherwise make some node consume itself.
void inject_cycle(RandomDag& dag, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> edges;  // (producer, consumer)
  for (size_t b = 0; b < dag.ids.size(); ++b)
    for (const auto& ref : dag.inputs[b])
      if (ref.rfind("node:", 0) == 0)
        for (size_t a = 0; a < dag.ids.size(); ++a)
          if (dag.ids[a] == ref.substr(5)) edges.emplace_back(int(a), int(b));

  if (edges.empty()) {
    size_t x = rng() % dag.ids.size();
    dag.inputs[x][0] = "node:" + dag.ids[x];
    return;
  }
  auto [a, b] = edges[rng() % edges.size()];
  dag.inputs[a][0] = "node:" + dag.ids[b];
}

}  // namespace

TEST_CASE("random DAGs parse and validate; cycle-injected mutants are rejected") {
  std::mt19937_64 rng(202);
  for (int iter = 0; iter < 150; ++iter) {
    RandomDag dag = make_random_dag(rng);
    std::string yaml = dag.to_yaml();
    ProductSpec spec = parse_spec(yaml);  // must not throw
    validate(spec);

    // topo order: a permutation that respects every node edge
    auto order = topo_order(spec);
    std::vector<std::string> ids;
    for (const auto& node : spec.nodes) ids.push_back(node.id);
    std::vector<std::string> sorted_order = order, sorted_ids = ids;
    std::sort(sorted_order.begin(), sorted_order.end());
    std::sort(sorted_ids.begin(), sorted_ids.end());
    CHECK(sorted_order == sorted_ids);

    std::map<std::string, size_t> position;
    for (size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
    for (const auto& node : spec.nodes)
      for (const auto& in : node.inputs)
        if (in.kind == InputRef::Kind::Node)
          CHECK(position.at(in.name) < position.at(node.id));

    // round-trip fixed point on the canonical form
    std::string y1 = serialize_spec(spec);
    CHECK(serialize_spec(parse_spec(y1)) == y1);

    RandomDag mutant = dag;
    inject_cycle(mutant, rng);
    CHECK(error_code_of([&] { parse_spec(mutant.to_yaml()); }) ==
          ErrorCode::CycleDetected);
  }
}
