#pragma once

#include <map>
#include <string>
#include <vector>

#include "vcube/ops.hpp"
#include "vcube/sensor.hpp"

namespace vcube {

// Reference to an operation input: either a source scene band ("band:B04")
// or the output of another node ("node:n1").
struct InputRef {
  enum class Kind { Band, Node };
  Kind kind = Kind::Band;
  std::string name;

  std::string str() const {
    return (kind == Kind::Band ? "band:" : "node:") + name;
  }

  bool operator==(const InputRef&) const = default;
};

struct OpNode {
  std::string id;
  std::string op;
  ParamMap params;
  std::vector<InputRef> inputs;

  bool operator==(const OpNode&) const = default;
};

// A validated virtual-product declaration: a DAG of operation nodes plus the
// output bands it materializes.
struct ProductSpec {
  std::string name;
  Sensor sensor = Sensor::Optical;
  std::vector<OpNode> nodes;
  std::map<std::string, std::string> outputs;  // output band name -> node id

  const OpNode* find_node(const std::string& id) const;
  bool has_temporal_node() const;

  bool operator==(const ProductSpec&) const = default;
};

// Parses and structurally validates a product declaration (YAML). Total over
// arbitrary input: every failure is a typed error, never a crash.
// Unreachable nodes survive parsing; validate() prunes them.
ProductSpec parse_spec(const std::string& text);

// Prunes nodes unreachable from the outputs, returning one warning per
// pruned node. After this, every node is live.
std::vector<std::string> validate(ProductSpec& spec);

// Deterministic topological order: among ready nodes, lexicographically
// smallest id first.
std::vector<std::string> topo_order(const ProductSpec& spec);

// DOT digraph with one node per OpNode (label "id\nop") and one edge per
// node-to-node input. Deterministic, golden-file friendly.
std::string render_dot(const ProductSpec& spec);

// Canonical serialization: nodes sorted by id, params and outputs sorted by
// name. parse(serialize(s)) == canonicalized s, and serialize∘parse is a
// fixed point on its own output.
std::string serialize_spec(const ProductSpec& spec);

}  // namespace vcube
