#include "vcube/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "vcube/error.hpp"

namespace vcube {

namespace {

[[noreturn]] void syntax_error(const std::string& msg, int line = -1) {
  if (line >= 0)
    throw Error(ErrorCode::SyntaxError, msg + " (line " + std::to_string(line) + ")");
  throw Error(ErrorCode::SyntaxError, msg);
}

int mark_line(const YAML::Node& node) {
  return node.Mark().line >= 0 ? node.Mark().line + 1 : -1;
}

bool valid_identifier(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.'))
      return false;
  return true;
}

ParamValue convert_param(const YAML::Node& value, const ParamSpec& spec,
                         const std::string& node_id) {
  auto fail = [&](const char* why) -> ParamValue {
    throw Error(ErrorCode::UnknownParam,
                "param '" + spec.name + "' of node '" + node_id + "' " + why +
                    " (expects " + param_type_name(spec.type) + ")");
  };
  if (!value.IsScalar()) return fail("must be a scalar");
  try {
    switch (spec.type) {
      case ParamType::Int:
        return ParamValue{value.as<int64_t>()};
      case ParamType::Float:
        return ParamValue{value.as<double>()};
      case ParamType::Bool:
        return ParamValue{value.as<bool>()};
      case ParamType::String:
        return ParamValue{value.as<std::string>()};
    }
  } catch (const YAML::Exception&) {
    return fail("has the wrong type");
  }
  return fail("has the wrong type");
}

InputRef parse_input_ref(const std::string& text, const std::string& node_id,
                         int line) {
  InputRef ref;
  if (text.rfind("band:", 0) == 0) {
    ref.kind = InputRef::Kind::Band;
    ref.name = text.substr(5);
  } else if (text.rfind("node:", 0) == 0) {
    ref.kind = InputRef::Kind::Node;
    ref.name = text.substr(5);
  } else {
    syntax_error("input '" + text + "' of node '" + node_id +
                     "' must start with 'band:' or 'node:'",
                 line);
  }
  if (!valid_identifier(ref.name))
    syntax_error("input '" + text + "' of node '" + node_id + "' is malformed", line);
  return ref;
}

// Adjacency over node:-edges, producer -> consumers.
std::map<std::string, std::vector<std::string>> node_edges(const ProductSpec& spec) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& n : spec.nodes) out.emplace(n.id, std::vector<std::string>{});
  for (const auto& n : spec.nodes)
    for (const auto& in : n.inputs)
      if (in.kind == InputRef::Kind::Node) out[in.name].push_back(n.id);
  for (auto& [_, v] : out) std::sort(v.begin(), v.end());
  return out;
}

void detect_cycles(const ProductSpec& spec) {
  enum class Color { White, Grey, Black };
  std::map<std::string, Color> color;
  std::map<std::string, std::vector<std::string>> deps;  // consumer -> producers
  for (const auto& n : spec.nodes) {
    color[n.id] = Color::White;
    auto& d = deps[n.id];
    for (const auto& in : n.inputs)
      if (in.kind == InputRef::Kind::Node) d.push_back(in.name);
    std::sort(d.begin(), d.end());
  }

  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    color[id] = Color::Grey;
    stack.push_back(id);
    for (const auto& dep : deps[id]) {
      if (color[dep] == Color::Grey) {
        auto it = std::find(stack.begin(), stack.end(), dep);
        std::vector<std::string> cycle(it, stack.end());
        std::sort(cycle.begin(), cycle.end());
        std::string msg = "cycle through nodes:";
        for (const auto& c : cycle) msg += " " + c;
        throw Error(ErrorCode::CycleDetected, msg, cycle);
      }
      if (color[dep] == Color::White) visit(dep);
    }
    stack.pop_back();
    color[id] = Color::Black;
  };

  for (const auto& n : spec.nodes)
    if (color[n.id] == Color::White) visit(n.id);
}

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  static const std::set<std::string> reserved = {"true", "false", "null", "~",
                                                 "yes",  "no",    "on",   "off"};
  if (reserved.count(s)) return true;
  if (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '+' ||
      s[0] == '.')
    return true;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.' || c == ':' || c == '/'))
      return true;
  return false;
}

std::string yaml_scalar(const ParamValue& v) {
  std::string s = param_to_string(v);
  if (param_type_of(v) != ParamType::String || !needs_quotes(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

const OpNode* ProductSpec::find_node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

bool ProductSpec::has_temporal_node() const {
  for (const auto& n : nodes) {
    const OpSignature* sig = OpRegistry::instance().find(n.op);
    if (sig && sig->temporal) return true;
  }
  return false;
}

ProductSpec parse_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    syntax_error(std::string("YAML parse failure: ") + e.msg, e.mark.line + 1);
  } catch (const YAML::Exception& e) {
    syntax_error(std::string("YAML parse failure: ") + e.what());
  }
  if (!root.IsMap()) syntax_error("document root must be a mapping");

  ProductSpec spec;

  YAML::Node name = root["name"];
  if (!name || !name.IsScalar()) syntax_error("missing 'name'");
  spec.name = name.as<std::string>();
  if (!valid_identifier(spec.name))
    syntax_error("product name '" + spec.name + "' is not a valid identifier");

  YAML::Node sensor = root["sensor"];
  if (!sensor || !sensor.IsScalar()) syntax_error("missing 'sensor'");
  auto parsed_sensor = sensor_from_string(sensor.as<std::string>());
  if (!parsed_sensor)
    syntax_error("sensor must be OPTICAL or SAR, got '" +
                     sensor.as<std::string>() + "'",
                 mark_line(sensor));
  spec.sensor = *parsed_sensor;

  for (const auto& kv : root) {
    std::string key = kv.first.as<std::string>();
    if (key != "name" && key != "sensor" && key != "nodes" && key != "outputs")
      syntax_error("unknown top-level key '" + key + "'", mark_line(kv.first));
  }

  YAML::Node nodes = root["nodes"];
  if (!nodes || !nodes.IsSequence() || nodes.size() == 0)
    syntax_error("'nodes' must be a non-empty sequence");

  const auto& registry = OpRegistry::instance();
  const auto& bands = sensor_bands(spec.sensor);

  std::set<std::string> ids;
  for (const auto& item : nodes) {
    if (!item.IsMap()) syntax_error("each node must be a mapping", mark_line(item));

    OpNode node;
    YAML::Node id = item["id"];
    if (!id || !id.IsScalar()) syntax_error("node missing 'id'", mark_line(item));
    node.id = id.as<std::string>();
    if (!valid_identifier(node.id))
      syntax_error("node id '" + node.id + "' is not a valid identifier",
                   mark_line(id));
    if (!ids.insert(node.id).second)
      syntax_error("duplicate node id '" + node.id + "'", mark_line(id));

    YAML::Node op = item["op"];
    if (!op || !op.IsScalar())
      syntax_error("node '" + node.id + "' missing 'op'", mark_line(item));
    node.op = op.as<std::string>();

    const OpSignature* sig = registry.find(node.op);
    if (!sig)
      throw Error(ErrorCode::UnknownOp,
                  "node '" + node.id + "' references unknown op '" + node.op + "'");

    for (const auto& kv : item) {
      std::string key = kv.first.as<std::string>();
      if (key != "id" && key != "op" && key != "params" && key != "inputs")
        syntax_error("node '" + node.id + "' has unknown key '" + key + "'",
                     mark_line(kv.first));
    }

    YAML::Node params = item["params"];
    if (params) {
      if (!params.IsMap())
        syntax_error("params of node '" + node.id + "' must be a mapping",
                     mark_line(params));
      for (const auto& kv : params) {
        std::string pname = kv.first.as<std::string>();
        const ParamSpec* pspec = sig->find_param(pname);
        if (!pspec)
          throw Error(ErrorCode::UnknownParam, "op '" + node.op +
                                                   "' has no param '" + pname +
                                                   "' (node '" + node.id + "')");
        ParamValue value = convert_param(kv.second, *pspec, node.id);
        if (!pspec->allowed.empty()) {
          const std::string& s = std::get<std::string>(value);
          if (std::find(pspec->allowed.begin(), pspec->allowed.end(), s) ==
              pspec->allowed.end()) {
            std::string options;
            for (const auto& a : pspec->allowed)
              options += (options.empty() ? "" : ", ") + a;
            throw Error(ErrorCode::UnknownParam,
                        "param '" + pname + "' of node '" + node.id +
                            "' must be one of: " + options);
          }
        }
        if (pspec->check) {
          std::string err = pspec->check(value);
          if (!err.empty())
            throw Error(ErrorCode::UnknownParam,
                        "node '" + node.id + "': " + err);
        }
        node.params.emplace(pname, std::move(value));
      }
    }

    for (const auto& pspec : sig->params) {
      if (node.params.count(pspec.name)) continue;
      if (pspec.default_value) {
        node.params.emplace(pspec.name, *pspec.default_value);
      } else if (pspec.required) {
        throw Error(ErrorCode::UnknownParam,
                    "node '" + node.id + "' is missing required param '" +
                        pspec.name + "'");
      }
    }

    YAML::Node inputs = item["inputs"];
    if (inputs) {
      if (!inputs.IsSequence())
        syntax_error("inputs of node '" + node.id + "' must be a sequence",
                     mark_line(inputs));
      for (const auto& in : inputs) {
        if (!in.IsScalar())
          syntax_error("inputs of node '" + node.id + "' must be strings",
                       mark_line(in));
        node.inputs.push_back(
            parse_input_ref(in.as<std::string>(), node.id, mark_line(in)));
      }
    }

    std::vector<std::string> roles = sig->input_roles(node.params);
    if (node.inputs.size() != roles.size())
      throw Error(ErrorCode::ArityMismatch,
                  "node '" + node.id + "' (op " + node.op + ") expects " +
                      std::to_string(roles.size()) + " inputs, got " +
                      std::to_string(node.inputs.size()));

    for (const auto& ref : node.inputs) {
      if (ref.kind == InputRef::Kind::Band &&
          std::find(bands.begin(), bands.end(), ref.name) == bands.end())
        throw Error(ErrorCode::DanglingRef,
                    "band '" + ref.name + "' is not provided by sensor " +
                        to_string(spec.sensor) + " (node '" + node.id + "')");
      if (sig->temporal && ref.kind != InputRef::Kind::Band)
        throw Error(ErrorCode::DanglingRef,
                    "temporal op '" + node.op +
                        "' consumes a source band stack; node inputs are not "
                        "supported (node '" +
                        node.id + "')");
    }
    if (sig->temporal && spec.sensor != Sensor::Optical)
      throw Error(ErrorCode::DanglingRef,
                  "temporal op '" + node.op + "' needs cloud masks; sensor " +
                      std::string(to_string(spec.sensor)) +
                      " does not provide MASK");

    spec.nodes.push_back(std::move(node));
  }

  for (const auto& n : spec.nodes)
    for (const auto& in : n.inputs)
      if (in.kind == InputRef::Kind::Node && !ids.count(in.name))
        throw Error(ErrorCode::DanglingRef, "node '" + n.id +
                                                "' references undefined node '" +
                                                in.name + "'");

  YAML::Node outputs = root["outputs"];
  if (!outputs || !outputs.IsMap() || outputs.size() == 0)
    syntax_error("'outputs' must be a non-empty mapping");
  for (const auto& kv : outputs) {
    std::string oname = kv.first.as<std::string>();
    if (!valid_identifier(oname))
      syntax_error("output name '" + oname + "' is not a valid identifier",
                   mark_line(kv.first));
    if (!kv.second.IsScalar())
      syntax_error("output '" + oname + "' must name a node", mark_line(kv.second));
    std::string target = kv.second.as<std::string>();
    if (!ids.count(target))
      throw Error(ErrorCode::DanglingRef,
                  "output '" + oname + "' references undefined node '" + target + "'");
    if (!spec.outputs.emplace(oname, target).second)
      syntax_error("duplicate output '" + oname + "'", mark_line(kv.first));
  }

  detect_cycles(spec);
  return spec;
}

std::vector<std::string> validate(ProductSpec& spec) {
  std::set<std::string> live;
  std::vector<std::string> frontier;
  for (const auto& [_, node_id] : spec.outputs)
    if (live.insert(node_id).second) frontier.push_back(node_id);
  while (!frontier.empty()) {
    std::string id = frontier.back();
    frontier.pop_back();
    const OpNode* n = spec.find_node(id);
    for (const auto& in : n->inputs)
      if (in.kind == InputRef::Kind::Node && live.insert(in.name).second)
        frontier.push_back(in.name);
  }

  std::vector<std::string> warnings;
  std::vector<OpNode> kept;
  kept.reserve(spec.nodes.size());
  for (auto& n : spec.nodes) {
    if (live.count(n.id)) {
      kept.push_back(std::move(n));
    } else {
      warnings.push_back("node '" + n.id +
                         "' is unreachable from the outputs and was pruned");
    }
  }
  spec.nodes = std::move(kept);
  return warnings;
}

std::vector<std::string> topo_order(const ProductSpec& spec) {
  std::map<std::string, int> indegree;
  for (const auto& n : spec.nodes) {
    int d = 0;
    for (const auto& in : n.inputs)
      if (in.kind == InputRef::Kind::Node) ++d;
    indegree[n.id] = d;
  }
  auto consumers = node_edges(spec);

  std::set<std::string> ready;  // ordered: lexicographic tie-break
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.insert(id);

  std::vector<std::string> order;
  order.reserve(spec.nodes.size());
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& consumer : consumers[id])
      if (--indegree[consumer] == 0) ready.insert(consumer);
  }
  return order;
}

std::string render_dot(const ProductSpec& spec) {
  std::vector<const OpNode*> sorted;
  for (const auto& n : spec.nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(),
            [](const OpNode* a, const OpNode* b) { return a->id < b->id; });

  std::ostringstream out;
  out << "digraph \"" << spec.name << "\" {\n";
  for (const OpNode* n : sorted)
    out << "  \"" << n->id << "\" [label=\"" << n->id << "\\n" << n->op << "\"];\n";

  std::vector<std::pair<std::string, std::string>> edges;
  for (const OpNode* n : sorted)
    for (const auto& in : n->inputs)
      if (in.kind == InputRef::Kind::Node) edges.emplace_back(in.name, n->id);
  std::sort(edges.begin(), edges.end());
  for (const auto& [from, to] : edges)
    out << "  \"" << from << "\" -> \"" << to << "\";\n";
  out << "}\n";
  return out.str();
}

std::string serialize_spec(const ProductSpec& spec) {
  std::vector<const OpNode*> sorted;
  for (const auto& n : spec.nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(),
            [](const OpNode* a, const OpNode* b) { return a->id < b->id; });

  std::ostringstream out;
  out << "name: " << spec.name << "\n";
  out << "sensor: " << to_string(spec.sensor) << "\n";
  out << "nodes:\n";
  for (const OpNode* n : sorted) {
    out << "  - id: " << n->id << "\n";
    out << "    op: " << n->op << "\n";
    if (!n->params.empty()) {
      out << "    params: {";
      bool first = true;
      for (const auto& [k, v] : n->params) {
        if (!first) out << ", ";
        first = false;
        out << k << ": " << yaml_scalar(v);
      }
      out << "}\n";
    }
    out << "    inputs: [";
    for (size_t i = 0; i < n->inputs.size(); ++i) {
      if (i) out << ", ";
      out << n->inputs[i].str();
    }
    out << "]\n";
  }
  out << "outputs:\n";
  for (const auto& [oname, node_id] : spec.outputs)
    out << "  " << oname << ": " << node_id << "\n";
  return out.str();
}

}  // namespace vcube
