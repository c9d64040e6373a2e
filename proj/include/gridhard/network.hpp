#pragma once

/* Distribution feeder model: nodes, lines (wires, protection devices, tie
 * switches), sources, and the line segments induced by the protection layout.
 *
 * A "zone" is a connected component of the wires-only subgraph. Every device
 * (breaker, recloser, fuse, switch) links two zones. Feeder segments are the
 * zones that contain at least one wire; a leaf node fed through a fuse is a
 * distribution transformer and forms its own segment. Segment boundaries are
 * all devices incident to the segment's nodes; opening them isolates a fault
 * inside the segment.
 */

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridhard/common.hpp"

namespace gridhard {

using json = nlohmann::json;

enum class LineKind { wire, sw, breaker, recloser, fuse };
enum class SegmentKind { feeder, transformer };

inline LineKind line_kind_from_string(const std::string& s) {
  if (s == "wire") return LineKind::wire;
  if (s == "switch") return LineKind::sw;
  if (s == "breaker") return LineKind::breaker;
  if (s == "recloser") return LineKind::recloser;
  if (s == "fuse") return LineKind::fuse;
  throw ConfigError("unknown line kind: " + s);
}

inline std::string to_string(LineKind k) {
  switch (k) {
    case LineKind::wire: return "wire";
    case LineKind::sw: return "switch";
    case LineKind::breaker: return "breaker";
    case LineKind::recloser: return "recloser";
    case LineKind::fuse: return "fuse";
  }
  return "?";
}

// Phases as a 3-bit mask, bit 0 = a, 1 = b, 2 = c.
using PhaseMask = std::uint8_t;

inline PhaseMask phase_mask_from_string(const std::string& s) {
  PhaseMask m = 0;
  for (char c : s) {
    if (c == 'a') m |= 1;
    else if (c == 'b') m |= 2;
    else if (c == 'c') m |= 4;
    else throw ConfigError("bad phase letter: " + std::string(1, c));
  }
  if (m == 0) throw ConfigError("empty phase set");
  return m;
}

inline std::string phase_mask_to_string(PhaseMask m) {
  std::string s;
  if (m & 1) s += 'a';
  if (m & 2) s += 'b';
  if (m & 4) s += 'c';
  return s;
}

inline int phase_count(PhaseMask m) {
  return ((m >> 0) & 1) + ((m >> 1) & 1) + ((m >> 2) & 1);
}

inline std::vector<int> phase_list(PhaseMask m) {
  std::vector<int> v;
  for (int p = 0; p < 3; ++p)
    if (m & (1 << p)) v.push_back(p);
  return v;
}

struct Node {
  std::string id;
  PhaseMask phases = 7;
  std::array<double, 3> p_max{0, 0, 0};  // kW per phase (a,b,c); 0 on absent phases
  std::array<double, 3> q_max{0, 0, 0};  // kvar per phase
  double weight = 1.0;                   // load priority, > 0
  bool is_source = false;
  double src_p_cap = 0.0;  // kW
  double src_q_cap = 0.0;  // kvar
};

struct Line {
  std::string id;
  int from = -1;
  int to = -1;
  LineKind kind = LineKind::wire;
  PhaseMask phases = 7;    // intersection of the endpoints' phase sets
  Eigen::Matrix3d r;       // p.u., rows/cols of absent phases zeroed
  Eigen::Matrix3d x;       // p.u.
  double i_max = 0.0;      // p.u. squared-current cap per phase
  double length_mi = 0.0;

  bool is_device() const { return kind != LineKind::wire; }
  bool is_protection() const {
    return kind == LineKind::breaker || kind == LineKind::recloser || kind == LineKind::fuse;
  }
};

struct LineSegment {
  std::string id;
  SegmentKind kind = SegmentKind::feeder;
  std::vector<std::string> member_lines;      // wire ids; empty for transformer
  std::vector<std::string> boundary_devices;  // devices incident to the segment
  std::vector<int> nodes;                     // node indices covered
  double length_mi = 0.0;
  int transformer_node = -1;  // node index for transformer segments
  // Hardening price tags in $M; < 0 means not applicable to this segment kind.
  double cost_pl = -1.0;
  double cost_ud = -1.0;
  double cost_pd = -1.0;
  bool no_underground = false;
  bool no_pole = false;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Line> lines;
  std::vector<int> sources;  // node indices
  std::vector<LineSegment> segments;

  // wires-only connected components
  int n_zones = 0;
  std::vector<int> zone_of_node;
  std::vector<int> segment_of_zone;  // -1 when the zone is not a segment

  std::map<std::string, int> node_idx;
  std::map<std::string, int> line_idx;
  std::map<std::string, int> segment_idx;

  int node_index(const std::string& id) const {
    auto it = node_idx.find(id);
    if (it == node_idx.end()) throw ConfigError("unknown node id: " + id);
    return it->second;
  }
  int line_index(const std::string& id) const {
    auto it = line_idx.find(id);
    if (it == line_idx.end()) throw ConfigError("unknown line id: " + id);
    return it->second;
  }
  int segment_index(const std::string& id) const {
    auto it = segment_idx.find(id);
    if (it == segment_idx.end()) throw ConfigError("unknown segment id: " + id);
    return it->second;
  }

  double total_load_kw() const {
    double t = 0;
    for (const auto& n : nodes)
      for (double v : n.p_max) t += v;
    return t;
  }

  double total_weighted_load_kw() const {
    double t = 0;
    for (const auto& n : nodes)
      t += n.weight * (n.p_max[0] + n.p_max[1] + n.p_max[2]);
    return t;
  }
};

namespace detail {

inline void compute_zones(Network& net) {
  const int n = static_cast<int>(net.nodes.size());
  net.zone_of_node.assign(n, -1);
  std::vector<std::vector<int>> wire_adj(n);
  for (const auto& l : net.lines) {
    if (l.kind == LineKind::wire) {
      wire_adj[l.from].push_back(l.to);
      wire_adj[l.to].push_back(l.from);
    }
  }
  int z = 0;
  for (int s = 0; s < n; ++s) {
    if (net.zone_of_node[s] >= 0) continue;
    std::vector<int> stack{s};
    net.zone_of_node[s] = z;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : wire_adj[u]) {
        if (net.zone_of_node[v] < 0) {
          net.zone_of_node[v] = z;
          stack.push_back(v);
        }
      }
    }
    ++z;
  }
  net.n_zones = z;
}

}  // namespace detail

/* Segment derivation. Deterministic: feeder segments ordered by their
 * smallest member line id, then transformer segments by node id. */
inline void derive_segments(Network& net) {
  detail::compute_zones(net);
  const int n = static_cast<int>(net.nodes.size());

  std::vector<int> degree(n, 0);
  for (const auto& l : net.lines) {
    degree[l.from]++;
    degree[l.to]++;
  }

  // Transformers: leaf node whose single incident line is a fuse.
  std::vector<char> is_transformer(n, 0);
  for (const auto& l : net.lines) {
    if (l.kind != LineKind::fuse) continue;
    for (int end : {l.from, l.to}) {
      if (degree[end] == 1 && !net.nodes[end].is_source) is_transformer[end] = 1;
    }
  }
  // Any other device hanging off a leaf is a modelling error.
  for (const auto& l : net.lines) {
    if (!l.is_device() || l.kind == LineKind::fuse) continue;
    for (int end : {l.from, l.to}) {
      if (degree[end] == 1 && !net.nodes[end].is_source)
        throw ConfigError("device with degree != 2: " + l.id);
    }
  }

  std::vector<std::vector<std::string>> zone_wires(net.n_zones);
  std::vector<double> zone_len(net.n_zones, 0.0);
  for (const auto& l : net.lines) {
    if (l.kind == LineKind::wire) {
      int z = net.zone_of_node[l.from];
      zone_wires[z].push_back(l.id);
      zone_len[z] += l.length_mi;
    }
  }
  std::vector<std::vector<int>> zone_nodes(net.n_zones);
  for (int i = 0; i < n; ++i) zone_nodes[net.zone_of_node[i]].push_back(i);

  std::vector<std::vector<std::string>> zone_boundary(net.n_zones);
  for (const auto& l : net.lines) {
    if (!l.is_device()) continue;
    int zf = net.zone_of_node[l.from];
    int zt = net.zone_of_node[l.to];
    zone_boundary[zf].push_back(l.id);
    if (zt != zf) zone_boundary[zt].push_back(l.id);
  }

  net.segments.clear();
  net.segment_idx.clear();
  net.segment_of_zone.assign(net.n_zones, -1);

  std::vector<std::pair<std::string, int>> feeder_order;  // (min wire id, zone)
  for (int z = 0; z < net.n_zones; ++z) {
    if (zone_wires[z].empty()) continue;
    feeder_order.emplace_back(*std::min_element(zone_wires[z].begin(), zone_wires[z].end()), z);
  }
  std::sort(feeder_order.begin(), feeder_order.end());

  for (const auto& [min_wire, z] : feeder_order) {
    LineSegment seg;
    seg.id = "Z_" + min_wire;
    seg.kind = SegmentKind::feeder;
    seg.member_lines = zone_wires[z];
    std::sort(seg.member_lines.begin(), seg.member_lines.end());
    seg.boundary_devices = zone_boundary[z];
    std::sort(seg.boundary_devices.begin(), seg.boundary_devices.end());
    seg.boundary_devices.erase(std::unique(seg.boundary_devices.begin(), seg.boundary_devices.end()),
                               seg.boundary_devices.end());
    seg.nodes = zone_nodes[z];
    seg.length_mi = zone_len[z];
    net.segment_of_zone[z] = static_cast<int>(net.segments.size());
    net.segment_idx[seg.id] = static_cast<int>(net.segments.size());
    net.segments.push_back(std::move(seg));
  }

  std::vector<int> tr_nodes;
  for (int i = 0; i < n; ++i)
    if (is_transformer[i]) tr_nodes.push_back(i);
  std::sort(tr_nodes.begin(), tr_nodes.end(),
            [&](int a, int b) { return net.nodes[a].id < net.nodes[b].id; });
  for (int i : tr_nodes) {
    LineSegment seg;
    seg.id = "T_" + net.nodes[i].id;
    seg.kind = SegmentKind::transformer;
    int z = net.zone_of_node[i];
    seg.boundary_devices = zone_boundary[z];
    std::sort(seg.boundary_devices.begin(), seg.boundary_devices.end());
    seg.nodes = {i};
    seg.transformer_node = i;
    net.segment_of_zone[z] = static_cast<int>(net.segments.size());
    net.segment_idx[seg.id] = static_cast<int>(net.segments.size());
    net.segments.push_back(std::move(seg));
  }
}

/* True iff the energized part of (wires + closed devices) is a spanning
 * forest: acyclic and no two sources share a component. `closed` is indexed
 * by line, wires' entries are ignored (always closed). */
inline bool validate_radiality(const Network& net, const std::vector<char>& closed) {
  const int n = static_cast<int>(net.nodes.size());
  std::vector<std::vector<int>> adj(n);  // line indices
  for (int li = 0; li < static_cast<int>(net.lines.size()); ++li) {
    const Line& l = net.lines[li];
    bool on = (l.kind == LineKind::wire) || closed[static_cast<size_t>(li)];
    if (!on) continue;
    adj[l.from].push_back(li);
    adj[l.to].push_back(li);
  }
  std::vector<int> comp(n, -1);
  int nc = 0;
  std::vector<int> comp_nodes, comp_edges, comp_sources;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    int nodes_cnt = 0, src_cnt = 0;
    std::set<int> edges;
    std::vector<int> stack{s};
    comp[s] = nc;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      nodes_cnt++;
      if (net.nodes[u].is_source) src_cnt++;
      for (int li : adj[u]) {
        edges.insert(li);
        const Line& l = net.lines[static_cast<size_t>(li)];
        int v = (l.from == u) ? l.to : l.from;
        if (comp[v] < 0) {
          comp[v] = nc;
          stack.push_back(v);
        }
      }
    }
    comp_nodes.push_back(nodes_cnt);
    comp_edges.push_back(static_cast<int>(edges.size()));
    comp_sources.push_back(src_cnt);
    ++nc;
  }
  for (int c = 0; c < nc; ++c) {
    if (comp_sources[c] == 0) continue;  // de-energized island, any shape
    if (comp_sources[c] > 1) return false;
    if (comp_edges[c] != comp_nodes[c] - 1) return false;  // cycle
  }
  return true;
}

inline bool validate_radiality(const Network& net, const std::set<std::string>& closed_ids) {
  std::vector<char> closed(net.lines.size(), 0);
  for (const auto& id : closed_ids) closed[static_cast<size_t>(net.line_index(id))] = 1;
  return validate_radiality(net, closed);
}

// Base state: protection devices closed, tie switches open.
inline std::vector<char> base_closed(const Network& net) {
  std::vector<char> closed(net.lines.size(), 0);
  for (size_t i = 0; i < net.lines.size(); ++i)
    if (net.lines[i].is_protection()) closed[i] = 1;
  return closed;
}

namespace detail {

inline Eigen::Matrix3d parse_matrix(const json& jm, PhaseMask phases, const std::string& what) {
  auto pl = phase_list(phases);
  const size_t np = pl.size();
  if (!jm.is_array() || jm.size() != np)
    throw ConfigError(what + ": matrix must be " + std::to_string(np) + "x" + std::to_string(np));
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < np; ++i) {
    if (!jm[i].is_array() || jm[i].size() != np)
      throw ConfigError(what + ": matrix must be " + std::to_string(np) + "x" + std::to_string(np));
    for (size_t j = 0; j < np; ++j)
      m(pl[i], pl[j]) = jm[i][j].get<double>();
  }
  for (size_t i = 0; i < np; ++i)
    for (size_t j = 0; j < np; ++j) {
      if (std::abs(m(pl[i], pl[j]) - m(pl[j], pl[i])) > 1e-9)
        throw ConfigError(what + ": matrix not symmetric");
    }
  for (size_t i = 0; i < np; ++i)
    if (m(pl[i], pl[i]) < 0) throw ConfigError(what + ": negative diagonal");
  return m;
}

inline std::array<double, 3> parse_per_phase(const json& ja, PhaseMask phases, const std::string& what) {
  auto pl = phase_list(phases);
  if (!ja.is_array() || ja.size() != pl.size())
    throw ConfigError(what + ": expected " + std::to_string(pl.size()) + " per-phase entries");
  std::array<double, 3> out{0, 0, 0};
  for (size_t i = 0; i < pl.size(); ++i) {
    double v = ja[i].get<double>();
    if (v < 0) throw ConfigError(what + ": negative value");
    out[static_cast<size_t>(pl[i])] = v;
  }
  return out;
}

}  // namespace detail

/* Near-zero device impedance, p.u. Devices carry this on their diagonal so
 * the voltage-drop rows stay well scaled. */
constexpr double kDeviceImpedanceEps = 1e-5;

inline Network load_network(const json& j) {
  Network net;
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ConfigError("network file: missing or unsupported version (want 1)");
  if (!j.contains("nodes") || !j.contains("lines"))
    throw ConfigError("network file: nodes and lines are required");

  for (const auto& jn : j["nodes"]) {
    Node n;
    n.id = jn.at("id").get<std::string>();
    if (net.node_idx.count(n.id)) throw ConfigError("duplicate node id: " + n.id);
    n.phases = phase_mask_from_string(jn.at("phases").get<std::string>());
    if (jn.contains("p_max")) n.p_max = detail::parse_per_phase(jn["p_max"], n.phases, "node " + n.id + " p_max");
    if (jn.contains("q_max")) n.q_max = detail::parse_per_phase(jn["q_max"], n.phases, "node " + n.id + " q_max");
    if (jn.contains("weight")) {
      n.weight = jn["weight"].get<double>();
      if (n.weight <= 0) throw ConfigError("node " + n.id + ": weight must be > 0");
    }
    if (jn.contains("source")) {
      n.is_source = true;
      n.src_p_cap = jn["source"].at("p_cap").get<double>();
      n.src_q_cap = jn["source"].at("q_cap").get<double>();
      if (n.src_p_cap <= 0 || n.src_q_cap <= 0)
        throw ConfigError("node " + n.id + ": source caps must be > 0");
    }
    net.node_idx[n.id] = static_cast<int>(net.nodes.size());
    net.nodes.push_back(std::move(n));
  }
  for (int i = 0; i < static_cast<int>(net.nodes.size()); ++i)
    if (net.nodes[static_cast<size_t>(i)].is_source) net.sources.push_back(i);
  if (net.sources.empty()) throw ConfigError("network has no source node");

  for (const auto& jl : j["lines"]) {
    Line l;
    l.id = jl.at("id").get<std::string>();
    if (net.line_idx.count(l.id)) throw ConfigError("duplicate line id: " + l.id);
    l.from = net.node_index(jl.at("from").get<std::string>());
    l.to = net.node_index(jl.at("to").get<std::string>());
    if (l.from == l.to) throw ConfigError("line " + l.id + ": self loop");
    l.kind = line_kind_from_string(jl.at("kind").get<std::string>());
    l.phases = net.nodes[static_cast<size_t>(l.from)].phases & net.nodes[static_cast<size_t>(l.to)].phases;
    if (l.phases == 0) throw ConfigError("line " + l.id + ": endpoints share no phase");
    if (l.kind == LineKind::wire) {
      l.r = detail::parse_matrix(jl.at("r"), l.phases, "line " + l.id + " r");
      l.x = detail::parse_matrix(jl.at("x"), l.phases, "line " + l.id + " x");
      l.i_max = jl.at("i_max").get<double>();
      if (l.i_max <= 0) throw ConfigError("line " + l.id + ": i_max must be > 0");
      l.length_mi = jl.at("length_mi").get<double>();
      if (l.length_mi <= 0) throw ConfigError("line " + l.id + ": length_mi must be > 0");
    } else {
      // Devices are near-ideal: fixed epsilon impedance regardless of file contents.
      l.r = Eigen::Matrix3d::Zero();
      l.x = Eigen::Matrix3d::Zero();
      for (int p : phase_list(l.phases)) {
        l.r(p, p) = kDeviceImpedanceEps;
        l.x(p, p) = kDeviceImpedanceEps;
      }
      l.i_max = jl.value("i_max", 1e6);
      l.length_mi = jl.value("length_mi", 0.0);
    }
    net.line_idx[l.id] = static_cast<int>(net.lines.size());
    net.lines.push_back(std::move(l));
  }

  // Loads only on declared phases (parse_per_phase guarantees), sources valid.
  for (const auto& n : net.nodes) {
    for (int p = 0; p < 3; ++p) {
      if (!(n.phases & (1 << p)) && (n.p_max[static_cast<size_t>(p)] != 0 || n.q_max[static_cast<size_t>(p)] != 0))
        throw ConfigError("node " + n.id + ": load on absent phase");
    }
  }

  // Base topology must be a forest covering every node exactly once.
  {
    auto closed = base_closed(net);
    const int n = static_cast<int>(net.nodes.size());
    std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, line)
    int closed_edges = 0;
    for (int li = 0; li < static_cast<int>(net.lines.size()); ++li) {
      const Line& l = net.lines[static_cast<size_t>(li)];
      if (l.kind != LineKind::wire && !closed[static_cast<size_t>(li)]) continue;
      adj[l.from].push_back({l.to, li});
      adj[l.to].push_back({l.from, li});
      closed_edges++;
    }
    std::vector<int> owner(n, -1);
    int reached = 0;
    for (int k : net.sources) {
      std::vector<int> stack{k};
      if (owner[k] >= 0) throw ConfigError("non-radial base topology: sources connected");
      owner[k] = k;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        reached++;
        for (auto [v, li] : adj[u]) {
          (void)li;
          if (owner[v] < 0) {
            owner[v] = k;
            stack.push_back(v);
          }
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (owner[i] < 0) throw ConfigError("orphan node: " + net.nodes[static_cast<size_t>(i)].id);
    // forest check: edges == nodes - sources and every node reached
    if (closed_edges != n - static_cast<int>(net.sources.size()) || reached != n)
      throw ConfigError("non-radial base topology");
    if (!validate_radiality(net, closed)) throw ConfigError("non-radial base topology");
  }

  derive_segments(net);

  // Hardening price tags and geography restrictions.
  if (!j.contains("harden_costs")) throw ConfigError("network file: harden_costs is required");
  const auto& hc = j["harden_costs"];
  for (auto it = hc.begin(); it != hc.end(); ++it) {
    if (!net.segment_idx.count(it.key())) throw ConfigError("harden_costs: unknown segment " + it.key());
  }
  for (auto& seg : net.segments) {
    if (!hc.contains(seg.id)) throw ConfigError("harden_costs: missing segment " + seg.id);
    const auto& e = hc[seg.id];
    if (seg.kind == SegmentKind::feeder) {
      seg.cost_pl = e.at("pl").get<double>();
      seg.cost_ud = e.at("ud").get<double>();
      if (seg.cost_pl <= 0 || seg.cost_ud <= 0)
        throw ConfigError("harden_costs: " + seg.id + " needs pl > 0 and ud > 0");
    } else {
      seg.cost_pd = e.at("pd").get<double>();
      if (seg.cost_pd <= 0) throw ConfigError("harden_costs: " + seg.id + " needs pd > 0");
    }
  }
  if (j.contains("geo")) {
    const auto& g = j["geo"];
    for (const auto& sid : g.value("no_underground", std::vector<std::string>{})) {
      auto& seg = net.segments[static_cast<size_t>(net.segment_index(sid))];
      if (seg.kind != SegmentKind::feeder) throw ConfigError("geo.no_underground: " + sid + " is not a feeder segment");
      seg.no_underground = true;
    }
    for (const auto& sid : g.value("no_pole", std::vector<std::string>{})) {
      auto& seg = net.segments[static_cast<size_t>(net.segment_index(sid))];
      if (seg.kind != SegmentKind::feeder) throw ConfigError("geo.no_pole: " + sid + " is not a feeder segment");
      seg.no_pole = true;
    }
  }
  return net;
}

inline Network load_network_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("network file " + path + ": " + e.what());
  }
  return load_network(j);
}

}  // namespace gridhard
