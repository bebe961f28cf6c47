#pragma once

// Structural path model: launch FF -> (node+ LUT)+ node+ -> capture FF.
// Nodes stand for a routing wire plus its entry switch. Launch FFs are
// treated as LUTs when pairs are classified; capture FFs never are.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pufent/detail/rng.hpp"
#include "pufent/error.hpp"

namespace pufent {

enum class ComponentKind : std::uint8_t { kLut, kNode, kLaunchFf, kCaptureFf };

struct ComponentId {
  ComponentKind kind = ComponentKind::kNode;
  std::string name;

  friend auto operator<=>(const ComponentId&, const ComponentId&) = default;
  friend bool operator==(const ComponentId&, const ComponentId&) = default;
};

enum class Polarity : std::uint8_t { kRising, kFalling };

inline char polarity_tag(Polarity p) { return p == Polarity::kRising ? 'R' : 'F'; }

struct PathRecord {
  std::uint32_t path_id = 0;
  Polarity polarity = Polarity::kRising;
  ComponentId launch_ff;
  ComponentId capture_ff;
  std::vector<ComponentId> components;  // excludes launch_ff and capture_ff
  int lut_count = 0;
  int node_count = 0;

  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

struct FabricDesign {
  std::vector<PathRecord> paths;
  std::size_t npr = 0;
  std::size_t npf = 0;
  std::vector<ComponentId> component_catalog;  // sorted, unique
  std::map<std::string, std::string> metadata;

  /// Position of a component in the catalog, or -1.
  std::ptrdiff_t index_of(const ComponentId& c) const {
    auto it = std::lower_bound(component_catalog.begin(), component_catalog.end(), c);
    if (it == component_catalog.end() || *it != c) return -1;
    return it - component_catalog.begin();
  }

  friend bool operator==(const FabricDesign&, const FabricDesign&) = default;
};

/// LUT-node class: total component count of a path.
inline int lut_node_class(const PathRecord& path) { return path.lut_count + path.node_count; }

/// Recomputes lut_count/node_count from the component list.
inline void recount(PathRecord& path) {
  path.lut_count = 0;
  path.node_count = 0;
  for (const auto& c : path.components) {
    if (c.kind == ComponentKind::kLut) ++path.lut_count;
    if (c.kind == ComponentKind::kNode) ++path.node_count;
  }
}

/// Node counts of each segment; the last entry is the run into the capture FF.
inline std::vector<int> segment_node_counts(const PathRecord& path) {
  std::vector<int> counts{0};
  for (const auto& c : path.components) {
    if (c.kind == ComponentKind::kNode) {
      ++counts.back();
    } else if (c.kind == ComponentKind::kLut) {
      counts.push_back(0);
    }
  }
  return counts;
}

/// Checks the structural invariants of one path; throws on violation.
inline void validate_path(const PathRecord& path) {
  if (path.components.empty()) {
    throw Error(ErrorCode::kEmptyPath, "path " + std::to_string(path.path_id) + " has no components");
  }
  std::size_t run = 0;
  for (const auto& c : path.components) {
    if (c.name.empty()) {
      throw Error(ErrorCode::kParseError, "path " + std::to_string(path.path_id) + ": empty component name");
    }
    if (c.kind == ComponentKind::kNode) {
      ++run;
    } else if (c.kind == ComponentKind::kLut) {
      if (run == 0) {
        throw Error(ErrorCode::kParseError,
                    "path " + std::to_string(path.path_id) + ": LUT " + c.name + " not preceded by a node");
      }
      run = 0;
    } else {
      throw Error(ErrorCode::kParseError, "path " + std::to_string(path.path_id) + ": FF inside component list");
    }
  }
  if (run == 0) {
    throw Error(ErrorCode::kParseError,
                "path " + std::to_string(path.path_id) + ": no node run into the capture FF");
  }
  if (path.lut_count < 1) {
    throw Error(ErrorCode::kParseError, "path " + std::to_string(path.path_id) + ": no LUT on path");
  }
}

/// Fills npr/npf and the catalog from the path list, checks id density.
inline void finalize_design(FabricDesign& design) {
  std::sort(design.paths.begin(), design.paths.end(),
            [](const PathRecord& a, const PathRecord& b) { return a.path_id < b.path_id; });
  std::set<ComponentId> catalog;
  design.npr = design.npf = 0;
  for (std::size_t i = 0; i < design.paths.size(); ++i) {
    auto& p = design.paths[i];
    if (p.path_id != i) {
      throw Error(ErrorCode::kParseError, "path ids are not dense 0..NP-1 (missing " + std::to_string(i) + ")");
    }
    recount(p);
    validate_path(p);
    (p.polarity == Polarity::kRising ? design.npr : design.npf) += 1;
    catalog.insert(p.launch_ff);
    catalog.insert(p.capture_ff);
    catalog.insert(p.components.begin(), p.components.end());
  }
  design.component_catalog.assign(catalog.begin(), catalog.end());
}

// ---------------------------------------------------------------------------
// Design file: line-oriented JSON, one path per line. An optional first line
// {"meta":{...}} carries generator metadata.

inline std::string path_to_json_line(const PathRecord& p) {
  nlohmann::ordered_json j;
  j["id"] = p.path_id;
  j["pol"] = std::string(1, polarity_tag(p.polarity));
  j["launch"] = p.launch_ff.name;
  j["capture"] = p.capture_ff.name;
  auto segs = nlohmann::ordered_json::array();
  nlohmann::ordered_json seg;
  seg["nodes"] = nlohmann::ordered_json::array();
  for (const auto& c : p.components) {
    if (c.kind == ComponentKind::kNode) {
      seg["nodes"].push_back(c.name);
    } else {
      seg["lut"] = c.name;
      segs.push_back(std::move(seg));
      seg = nlohmann::ordered_json();
      seg["nodes"] = nlohmann::ordered_json::array();
    }
  }
  seg["lut"] = nullptr;
  segs.push_back(std::move(seg));
  j["segs"] = std::move(segs);
  return j.dump();
}

inline void write_design(const FabricDesign& design, std::ostream& out) {
  if (!design.metadata.empty()) {
    nlohmann::ordered_json meta;
    meta["meta"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : design.metadata) meta["meta"][k] = v;
    out << meta.dump() << '\n';
  }
  for (const auto& p : design.paths) out << path_to_json_line(p) << '\n';
}

inline void write_design(const FabricDesign& design, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + file);
  write_design(design, out);
}

namespace detail {

inline PathRecord path_from_json(const nlohmann::json& j, std::size_t line) {
  auto fail = [line](const std::string& msg) {
    return Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + msg);
  };
  PathRecord p;
  if (!j.contains("id") || !j["id"].is_number_unsigned()) throw fail("missing or invalid \"id\"");
  p.path_id = j["id"].get<std::uint32_t>();
  const std::string pol = j.value("pol", "");
  if (pol == "R") {
    p.polarity = Polarity::kRising;
  } else if (pol == "F") {
    p.polarity = Polarity::kFalling;
  } else {
    throw fail("\"pol\" must be \"R\" or \"F\"");
  }
  if (!j.contains("launch") || !j["launch"].is_string()) throw fail("missing \"launch\"");
  if (!j.contains("capture") || !j["capture"].is_string()) throw fail("missing \"capture\"");
  p.launch_ff = {ComponentKind::kLaunchFf, j["launch"].get<std::string>()};
  p.capture_ff = {ComponentKind::kCaptureFf, j["capture"].get<std::string>()};
  if (p.launch_ff.name.empty() || p.capture_ff.name.empty()) throw fail("empty FF name");
  if (!j.contains("segs") || !j["segs"].is_array()) throw fail("missing \"segs\"");
  const auto& segs = j["segs"];
  if (segs.empty()) {
    throw Error(ErrorCode::kEmptyPath, "line " + std::to_string(line) + ": path " +
                                           std::to_string(p.path_id) + " has no segments");
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto& seg = segs[s];
    if (!seg.is_object() || !seg.contains("nodes") || !seg["nodes"].is_array()) {
      throw fail("segment " + std::to_string(s) + " lacks a \"nodes\" array");
    }
    for (const auto& n : seg["nodes"]) {
      if (!n.is_string()) throw fail("node names must be strings");
      p.components.push_back({ComponentKind::kNode, n.get<std::string>()});
    }
    const bool last = s + 1 == segs.size();
    const auto lut = seg.contains("lut") ? seg["lut"] : nlohmann::json();
    if (last) {
      if (!lut.is_null()) throw fail("final segment must have \"lut\":null");
    } else {
      if (!lut.is_string()) throw fail("segment " + std::to_string(s) + " needs a LUT name");
      p.components.push_back({ComponentKind::kLut, lut.get<std::string>()});
    }
  }
  recount(p);
  try {
    validate_path(p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyPath) throw;
    throw fail(e.what());
  }
  return p;
}

}  // namespace detail

inline FabricDesign parse_design(std::istream& in) {
  FabricDesign design;
  std::set<std::uint32_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.is_object() && j.contains("meta")) {
      for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it) {
        design.metadata[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
      }
      continue;
    }
    PathRecord p = detail::path_from_json(j, lineno);
    if (!seen.insert(p.path_id).second) {
      throw Error(ErrorCode::kDuplicatePathId,
                  "line " + std::to_string(lineno) + ": path id " + std::to_string(p.path_id));
    }
    design.paths.push_back(std::move(p));
  }
  finalize_design(design);
  return design;
}

inline FabricDesign parse_design(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file);
  return parse_design(in);
}

// ---------------------------------------------------------------------------
// Synthetic layered fabric.

struct DesignParams {
  int n_inputs = 16;
  int n_layers = 12;
  int luts_per_layer = 64;
  int n_outputs = 4;  // capture FFs; 0 means luts_per_layer
  int fanin = 3;
  int fanout = 4;
  int nodes_min = 1;  // nodes per segment, inclusive range
  int nodes_max = 3;
  int target_path_count = 1000;  // per polarity
  double bypass_prob = 0.0;      // chance a LUT input skips one layer
  std::uint64_t seed = 1;
};

namespace detail {

struct Fabric {
  struct Edge {
    int src_layer, src_index;
    std::vector<std::string> nodes;  // edge-specific nodes
  };
  // layer 0 = launch FFs, layers 1..n = LUTs
  std::vector<int> width;
  std::vector<std::vector<std::vector<Edge>>> inputs;    // [layer][lut] -> input edges
  std::vector<std::vector<std::vector<std::string>>> prefix;  // [layer][idx] -> shared net nodes
  std::vector<std::vector<std::string>> capture_nodes;   // [output] edge nodes into capture FF
};

inline std::string lut_name(int layer, int idx) {
  return "SLICE_X" + std::to_string(layer) + "Y" + std::to_string(idx) + "/LUT";
}
inline std::string launch_name(int idx) { return "FF/launch_" + std::to_string(idx) + "/Q"; }
inline std::string capture_name(int idx) { return "FF/capture_" + std::to_string(idx) + "/D"; }

inline Fabric build_fabric(const DesignParams& p, Stream& rng) {
  Fabric f;
  const int n = p.n_layers;
  const int outputs = p.n_outputs == 0 ? p.luts_per_layer : std::min(p.n_outputs, p.luts_per_layer);
  f.width.resize(n + 1);
  f.width[0] = p.n_inputs;
  for (int l = 1; l <= n; ++l) f.width[l] = (l == n) ? outputs : p.luts_per_layer;

  f.prefix.resize(n + 1);
  for (int l = 0; l <= n; ++l) {
    f.prefix[l].resize(f.width[l]);
    for (int i = 0; i < f.width[l]; ++i) {
      f.prefix[l][i] = {"CLBLM_X" + std::to_string(l) + "Y" + std::to_string(i) + "/LOGIC_OUTS"};
    }
  }
  auto edge_nodes = [&](const std::string& stem) {
    const auto count = static_cast<int>(rng.uniform(p.nodes_min - 1, p.nodes_max - 1));
    std::vector<std::string> nodes;
    for (int k = 0; k < count; ++k) nodes.push_back(stem + "N" + std::to_string(k));
    return nodes;
  };

  std::vector<std::vector<int>> used(n + 1);
  for (int l = 0; l <= n; ++l) used[l].assign(f.width[l], 0);
  f.inputs.resize(n + 1);
  for (int l = 1; l <= n; ++l) {
    f.inputs[l].resize(f.width[l]);
    for (int i = 0; i < f.width[l]; ++i) {
      std::set<std::pair<int, int>> chosen;
      const int want = p.fanin;
      for (int pin = 0; pin < want; ++pin) {
        int src_layer = l - 1;
        if (l >= 2 && p.bypass_prob > 0.0 && rng.unit() < p.bypass_prob) src_layer = l - 2;
        std::vector<int> open;
        std::vector<int> any;
        for (int s = 0; s < f.width[src_layer]; ++s) {
          if (chosen.count({src_layer, s})) continue;
          any.push_back(s);
          if (used[src_layer][s] < p.fanout) open.push_back(s);
        }
        if (any.empty()) break;
        int src;
        if (!open.empty()) {
          src = open[rng.uniform(0, open.size() - 1)];
        } else {
          src = *std::min_element(any.begin(), any.end(),
                                  [&](int a, int b) { return used[src_layer][a] < used[src_layer][b]; });
        }
        chosen.insert({src_layer, src});
        ++used[src_layer][src];
        const std::string stem = "INT_X" + std::to_string(l) + "Y" + std::to_string(i) + "/I" +
                                 std::to_string(pin) + "_";
        f.inputs[l][i].push_back({src_layer, src, edge_nodes(stem)});
      }
    }
  }
  f.capture_nodes.resize(outputs);
  for (int o = 0; o < outputs; ++o) f.capture_nodes[o] = edge_nodes("INT_CAP" + std::to_string(o) + "/D_");
  return f;
}

// A path through the fabric as (layer, index) stops from launch to the output LUT.
using Route = std::vector<std::pair<int, int>>;

inline PathRecord route_to_path(const Fabric& f, const Route& route, int output, Polarity pol) {
  PathRecord p;
  p.polarity = pol;
  p.launch_ff = {ComponentKind::kLaunchFf, launch_name(route.front().second)};
  p.capture_ff = {ComponentKind::kCaptureFf, capture_name(output)};
  for (std::size_t s = 1; s < route.size(); ++s) {
    const auto [sl, si] = route[s - 1];
    const auto [dl, di] = route[s];
    for (const auto& nd : f.prefix[sl][si]) p.components.push_back({ComponentKind::kNode, nd});
    const auto& edges = f.inputs[dl][di];
    auto e = std::find_if(edges.begin(), edges.end(),
                          [&](const Fabric::Edge& x) { return x.src_layer == sl && x.src_index == si; });
    for (const auto& nd : e->nodes) p.components.push_back({ComponentKind::kNode, nd});
    p.components.push_back({ComponentKind::kLut, lut_name(dl, di)});
  }
  const auto [ll, li] = route.back();
  for (const auto& nd : f.prefix[ll][li]) p.components.push_back({ComponentKind::kNode, nd});
  for (const auto& nd : f.capture_nodes[output]) p.components.push_back({ComponentKind::kNode, nd});
  recount(p);
  return p;
}

/// Routes ending at each output LUT, enumerated exhaustively by forward DFS
/// when the total is small, else by deduplicated random backward walks.
inline std::vector<std::pair<Route, int>> enumerate_routes(const Fabric& f, int target, Stream& rng) {
  const int n = static_cast<int>(f.width.size()) - 1;
  const int outputs = f.width[n];
  // number of routes from any launch FF to each LUT
  std::vector<std::vector<double>> count(n + 1);
  count[0].assign(f.width[0], 1.0);
  for (int l = 1; l <= n; ++l) {
    count[l].assign(f.width[l], 0.0);
    for (int i = 0; i < f.width[l]; ++i) {
      for (const auto& e : f.inputs[l][i]) count[l][i] += count[e.src_layer][e.src_index];
    }
  }
  double total = 0.0;
  for (int o = 0; o < outputs; ++o) total += count[n][o];

  std::vector<std::pair<Route, int>> routes;
  if (total <= target) {
    // forward DFS, launch -> capture
    std::vector<std::vector<std::vector<std::pair<int, int>>>> sinks(n + 1);
    for (int l = 0; l <= n; ++l) sinks[l].resize(f.width[l]);
    for (int l = 1; l <= n; ++l) {
      for (int i = 0; i < f.width[l]; ++i) {
        for (const auto& e : f.inputs[l][i]) sinks[e.src_layer][e.src_index].push_back({l, i});
      }
    }
    Route stack;
    auto dfs = [&](auto&& self, int l, int i) -> void {
      stack.push_back({l, i});
      if (l == n) routes.push_back({stack, i});
      for (const auto& [nl, ni] : sinks[l][i]) self(self, nl, ni);
      stack.pop_back();
    };
    for (int i = 0; i < f.width[0]; ++i) dfs(dfs, 0, i);
    return routes;
  }

  std::set<Route> seen;
  const long max_attempts = 50L * target + 1000;
  long attempts = 0;
  int next_output = 0;
  while (static_cast<int>(routes.size()) < target && attempts < max_attempts) {
    ++attempts;
    const int o = next_output;
    Route r{{n, o}};
    int l = n, i = o;
    bool dead = false;
    while (l > 0) {
      const auto& edges = f.inputs[l][i];
      if (edges.empty()) {
        dead = true;
        break;
      }
      const auto& e = edges[rng.uniform(0, edges.size() - 1)];
      l = e.src_layer;
      i = e.src_index;
      r.push_back({l, i});
    }
    if (dead) continue;
    next_output = (next_output + 1) % outputs;
    std::reverse(r.begin(), r.end());
    if (seen.insert(r).second) routes.push_back({std::move(r), o});
  }
  return routes;
}

/// True if some same-polarity pair has equal length and shares the capture FF.
inline bool has_reconvergent_pair(const FabricDesign& d) {
  std::set<std::tuple<Polarity, std::string, int>> keys;
  for (const auto& p : d.paths) {
    if (!keys.insert({p.polarity, p.capture_ff.name, p.lut_count}).second) return true;
  }
  return false;
}

}  // namespace detail

/// Builds a layered random DAG and enumerates rising and falling paths over it.
inline FabricDesign generate_design(const DesignParams& params) {
  const auto& p = params;
  if (p.n_inputs < 1 || p.n_layers < 1 || p.luts_per_layer < 1 || p.fanin < 1 || p.target_path_count < 1 ||
      p.nodes_min < 1 || p.nodes_max < p.nodes_min || p.n_outputs < 0) {
    throw Error(ErrorCode::kUnsatisfiableParams, "all counts must be >= 1 and nodes_min <= nodes_max");
  }
  if (p.fanout < 2 || p.fanin < 2) {
    throw Error(ErrorCode::kUnsatisfiableParams, "fanin and fanout must be >= 2 for reconvergent pairs");
  }
  if (p.bypass_prob < 0.0 || p.bypass_prob > 1.0) {
    throw Error(ErrorCode::kUnsatisfiableParams, "bypass_prob must be in [0,1]");
  }
  detail::Stream rng(detail::hash_keys(p.seed, 0xFAB51Cull));
  const detail::Fabric fabric = detail::build_fabric(p, rng);

  FabricDesign design;
  std::uint32_t next_id = 0;
  for (Polarity pol : {Polarity::kRising, Polarity::kFalling}) {
    detail::Stream walk(detail::hash_keys(p.seed, 0x3A1Cull, static_cast<std::uint64_t>(pol)));
    for (auto& [route, output] : detail::enumerate_routes(fabric, p.target_path_count, walk)) {
      PathRecord rec = detail::route_to_path(fabric, route, output, pol);
      rec.path_id = next_id++;
      design.paths.push_back(std::move(rec));
    }
  }
  design.metadata = {
      {"generator", "layered"},
      {"seed", std::to_string(p.seed)},
      {"n_inputs", std::to_string(p.n_inputs)},
      {"n_layers", std::to_string(p.n_layers)},
      {"luts_per_layer", std::to_string(p.luts_per_layer)},
      {"n_outputs", std::to_string(p.n_outputs)},
      {"fanin", std::to_string(p.fanin)},
      {"fanout", std::to_string(p.fanout)},
      {"nodes_per_segment", std::to_string(p.nodes_min) + ".." + std::to_string(p.nodes_max)},
      {"target_path_count", std::to_string(p.target_path_count)},
      {"bypass_prob", std::to_string(p.bypass_prob)},
  };
  finalize_design(design);
  if (!detail::has_reconvergent_pair(design)) {
    throw Error(ErrorCode::kUnsatisfiableParams, "no equal-length path pair shares a capture FF");
  }
  return design;
}

}  // namespace pufent
