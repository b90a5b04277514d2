#pragma once

// Purkinje-like conduction network: a weighted graph of fibers with a root
// (AV node), terminal junction candidates and removable (blocked) edges.
// Activation along the network obeys c_p |du/ds| = 1, which on a graph is
// the multi-source shortest-path problem solved here with Dijkstra.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eikcouple/mesh.hpp"
#include "eikcouple/mesh_io.hpp"

namespace eikcouple {

inline constexpr Index kNoIndex = static_cast<Index>(-1);

struct NetworkEdge {
  Index a = 0;
  Index b = 0;
  double length = 0.0;        ///< meters
  bool explicit_length = false;  ///< length is not the endpoint distance
};

class ConductionNetwork {
 public:
  ConductionNetwork() = default;

  ConductionNetwork(std::vector<Point> nodes, std::vector<NetworkEdge> edges, double conduction_velocity,
                    Index avn_node, std::vector<Index> terminal_nodes, std::set<Index> blocked_edges = {})
      : nodes_(std::move(nodes)),
        edges_(std::move(edges)),
        c_p_(conduction_velocity),
        avn_(avn_node),
        terminals_(std::move(terminal_nodes)),
        blocked_(std::move(blocked_edges)) {
    validate();
    adjacency_.assign(nodes_.size(), {});
    for (Index e = 0; e < edges_.size(); ++e) {
      adjacency_[edges_[e].a].push_back(e);
      adjacency_[edges_[e].b].push_back(e);
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(Index i) const { return nodes_[i]; }
  const std::vector<NetworkEdge>& edges() const { return edges_; }
  const NetworkEdge& edge(Index e) const { return edges_[e]; }
  double conduction_velocity() const { return c_p_; }
  Index avn_node() const { return avn_; }
  const std::vector<Index>& terminal_nodes() const { return terminals_; }
  const std::set<Index>& blocked_edges() const { return blocked_; }
  bool is_blocked(Index e) const { return blocked_.contains(e); }
  /// Incident edge indices, blocked ones included.
  const std::vector<Index>& incident_edges(Index node) const { return adjacency_[node]; }

  Index other_end(Index e, Index from) const { return edges_[e].a == from ? edges_[e].b : edges_[e].a; }

  double total_length() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.length;
    return s;
  }

 private:
  void validate() const {
    if (!(c_p_ > 0.0) || !std::isfinite(c_p_)) throw ValidationError("conduction velocity must be positive");
    if (nodes_.empty()) throw ValidationError("network has no nodes");
    if (avn_ >= nodes_.size()) throw ValidationError("AV node index out of range");
    std::vector<std::size_t> degree(nodes_.size(), 0);
    for (Index e = 0; e < edges_.size(); ++e) {
      const auto& ed = edges_[e];
      if (ed.a >= nodes_.size() || ed.b >= nodes_.size())
        throw ValidationError("edge " + std::to_string(e) + " references a node out of range", e);
      if (ed.a == ed.b) throw ValidationError("edge " + std::to_string(e) + " is a self-loop", e);
      if (!(ed.length > 0.0) || !std::isfinite(ed.length))
        throw ValidationError("edge " + std::to_string(e) + " has non-positive length", e);
      if (!ed.explicit_length && std::abs(ed.length - distance(nodes_[ed.a], nodes_[ed.b])) > 1e-9)
        throw ValidationError("edge " + std::to_string(e) + " length differs from its endpoint distance", e);
      ++degree[ed.a];
      ++degree[ed.b];
    }
    for (Index e : blocked_)
      if (e >= edges_.size()) throw ValidationError("blocked edge " + std::to_string(e) + " out of range", e);
    std::set<Index> seen;
    for (Index t : terminals_) {
      if (t >= nodes_.size()) throw ValidationError("terminal node " + std::to_string(t) + " out of range");
      if (t == avn_) throw ValidationError("the AV node cannot be a terminal");
      if (degree[t] != 1) throw ValidationError("terminal node " + std::to_string(t) + " does not have degree 1");
      if (!seen.insert(t).second) throw ValidationError("terminal node " + std::to_string(t) + " listed twice");
    }
  }

  std::vector<Point> nodes_;
  std::vector<NetworkEdge> edges_;
  double c_p_ = 4.0;
  Index avn_ = 0;
  std::vector<Index> terminals_;
  std::set<Index> blocked_;
  std::vector<std::vector<Index>> adjacency_;
};

/// Copy of `network` with `edges` added to its blocked set.
inline ConductionNetwork apply_blocks(const ConductionNetwork& network, const std::set<Index>& edges) {
  std::set<Index> blocked = network.blocked_edges();
  for (Index e : edges) {
    if (e >= network.num_edges()) throw ValidationError("cannot block edge " + std::to_string(e) + ": out of range", e);
    blocked.insert(e);
  }
  return ConductionNetwork(network.nodes(), network.edges(), network.conduction_velocity(), network.avn_node(),
                           network.terminal_nodes(), std::move(blocked));
}

struct NetworkSource {
  Index node = 0;
  double time = 0.0;  ///< seconds
};

struct NetworkSourceSet {
  std::vector<NetworkSource> sources;
  /// Earliest admissible prescribed time.
  double time_origin = 0.0;
};

/// Activation times of every network node. `origin[v]` is the source node
/// whose front realises `times[v]` (kNoIndex when unreached).
struct NodeActivation {
  std::vector<double> times;
  std::vector<Index> origin;

  bool reached(Index v) const { return std::isfinite(times[v]); }
};

/// times[v] = min over sources s of (t_s + dist(s, v) / c_p), blocked edges
/// removed. A source reached earlier by another front is overridden.
/// Equal keys pop lowest node index first; equal candidate times keep the
/// first one found.
inline NodeActivation solve_network(const ConductionNetwork& network, const NetworkSourceSet& source_set) {
  const auto& sources = source_set.sources;
  if (sources.empty()) throw ValidationError("network source set is empty");
  const std::size_t n = network.num_nodes();
  for (const auto& s : sources) {
    if (s.node >= n) throw ValidationError("network source node " + std::to_string(s.node) + " out of range");
    if (!std::isfinite(s.time)) throw ValidationError("network source time must be finite");
    if (s.time < source_set.time_origin) throw ValidationError("network source time precedes the time origin");
  }

  NodeActivation out{std::vector<double>(n, kInfinity), std::vector<Index>(n, kNoIndex)};
  std::vector<double> dist(n, kInfinity);
  std::vector<double> start(n, 0.0);
  std::vector<char> settled(n, 0);
  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;

  for (const auto& s : sources)
    if (s.time < out.times[s.node]) {
      out.times[s.node] = s.time;
      out.origin[s.node] = s.node;
      dist[s.node] = 0.0;
      start[s.node] = s.time;
      queue.emplace(s.time, s.node);
    }

  const double c_p = network.conduction_velocity();
  while (!queue.empty()) {
    const auto [key, v] = queue.top();
    queue.pop();
    if (settled[v] || key != out.times[v]) continue;
    settled[v] = 1;
    for (Index e : network.incident_edges(v)) {
      if (network.is_blocked(e)) continue;
      const Index w = network.other_end(e, v);
      if (settled[w]) continue;
      const double d = dist[v] + network.edge(e).length;
      const double t = start[v] + d / c_p;
      if (t < out.times[w]) {
        out.times[w] = t;
        out.origin[w] = out.origin[v];
        dist[w] = d;
        start[w] = start[v];
        queue.emplace(t, w);
      }
    }
  }
  return out;
}

/// Planar binary tree used as a desk-scale stand-in for a Purkinje tree.
struct TreeSpec {
  int depth = 3;                 ///< generations below the root; 2^depth leaves
  double segment_length = 5e-3;  ///< first-generation segment length [m]
  double length_ratio = 0.8;     ///< child / parent segment length
  double branch_angle = 1.0;     ///< opening angle between siblings [rad]
  double heading = -std::numbers::pi / 2;  ///< direction of the first split, from +x in the xy-plane [rad]
  Point root{0.0, 0.0, 0.0};
  double angle_jitter = 0.0;     ///< uniform +/- perturbation of every branch direction [rad]
  std::uint64_t seed = 0;
  double conduction_velocity = 4.0;  ///< c_p [m/s]
};

/// Nodes in breadth-first order (root = 0 = AV node), edge e joins a parent
/// to its child, leaves are the terminals. Edge 0 leads to the first
/// subtree of the root. The tree lies in the plane z = root.z.
inline ConductionNetwork build_synthetic_tree(const TreeSpec& spec) {
  if (spec.depth < 1) throw ValidationError("tree depth must be >= 1");
  if (spec.depth > 20) throw ValidationError("tree depth must be <= 20");
  if (!(spec.segment_length > 0.0)) throw ValidationError("tree segment length must be > 0");
  if (!(spec.length_ratio > 0.0)) throw ValidationError("tree length ratio must be > 0");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(-spec.angle_jitter, spec.angle_jitter);

  std::vector<Point> nodes{spec.root};
  std::vector<double> heading{spec.heading};
  std::vector<NetworkEdge> edges;
  std::vector<Index> level{0};
  double length = spec.segment_length;
  for (int gen = 1; gen <= spec.depth; ++gen) {
    std::vector<Index> next;
    for (Index parent : level)
      for (int side : {+1, -1}) {
        double theta = heading[parent] + side * spec.branch_angle / 2;
        if (spec.angle_jitter > 0.0) theta += jitter(rng);
        const Point p = nodes[parent];
        const Point q{p[0] + length * std::cos(theta), p[1] + length * std::sin(theta), p[2]};
        const Index child = nodes.size();
        nodes.push_back(q);
        heading.push_back(theta);
        edges.push_back({parent, child, distance(p, q), false});
        next.push_back(child);
      }
    level = std::move(next);
    length *= spec.length_ratio;
  }
  return ConductionNetwork(std::move(nodes), std::move(edges), spec.conduction_velocity, 0, level);
}

// Network text format:
//   nn ne c_p avn
//   nn lines "x y z"
//   ne lines "a b [length]"  (length omitted -> endpoint distance)
//   terminals: i j k ...
inline ConductionNetwork read_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string raw;
  for (std::size_t no = 1; std::getline(in, raw); ++no) {
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.emplace_back(no, raw);
  }
  std::size_t cur = 0;
  auto next_line = [&](const char* what) -> std::pair<std::size_t, std::istringstream> {
    if (cur >= lines.size())
      throw ParseError(path, lines.empty() ? 1 : lines.back().first, std::string("unexpected end of file, expected ") + what);
    const auto& [no, text] = lines[cur++];
    return {no, std::istringstream(text)};
  };
  auto [hno, header] = next_line("header");
  std::size_t nn = 0, ne = 0;
  double c_p = 0.0;
  Index avn = 0;
  if (!(header >> nn >> ne >> c_p >> avn)) throw ParseError(path, hno, "header must be 'nn ne c_p avn'");

  std::vector<Point> nodes(nn);
  for (auto& p : nodes) {
    auto [no, ls] = next_line("node coordinates");
    if (!(ls >> p[0] >> p[1] >> p[2])) throw ParseError(path, no, "expected three node coordinates");
  }
  std::vector<NetworkEdge> edges(ne);
  std::vector<std::size_t> edge_lines(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    auto [no, ls] = next_line("edge");
    edge_lines[e] = no;
    auto& ed = edges[e];
    if (!(ls >> ed.a >> ed.b)) throw ParseError(path, no, "expected 'a b [length]'");
    if (ls >> ed.length) {
      ed.explicit_length = true;
    } else {
      if (ed.a >= nn || ed.b >= nn) throw ParseError(path, no, "edge references a node out of range");
      ed.length = distance(nodes[ed.a], nodes[ed.b]);
    }
  }
  auto [tno, tl] = next_line("terminals line");
  std::string tag;
  tl >> tag;
  if (tag != "terminals:") throw ParseError(path, tno, "expected 'terminals:'");
  std::vector<Index> terminals;
  for (Index t; tl >> t;) terminals.push_back(t);
  if (!tl.eof()) throw ParseError(path, tno, "malformed terminal index");
  if (cur != lines.size()) throw ParseError(path, lines[cur].first, "trailing content");

  try {
    return ConductionNetwork(std::move(nodes), std::move(edges), c_p, avn, std::move(terminals));
  } catch (const ValidationError& e) {
    if (e.entity() != ValidationError::npos && e.entity() < edge_lines.size() &&
        std::string(e.what()).rfind("edge", 0) == 0)
      throw ValidationError(path + ":" + std::to_string(edge_lines[e.entity()]) + ": " + e.what(), e.entity());
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_network(const std::string& path, const ConductionNetwork& net) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << net.num_nodes() << ' ' << net.num_edges() << ' ' << format_number(net.conduction_velocity(), kCoordinateDigits)
      << ' ' << net.avn_node() << '\n';
  for (const auto& p : net.nodes())
    out << format_number(p[0], kCoordinateDigits) << ' ' << format_number(p[1], kCoordinateDigits) << ' '
        << format_number(p[2], kCoordinateDigits) << '\n';
  for (const auto& e : net.edges()) {
    out << e.a << ' ' << e.b;
    if (e.explicit_length) out << ' ' << format_number(e.length, kCoordinateDigits);
    out << '\n';
  }
  out << "terminals:";
  for (Index t : net.terminal_nodes()) out << ' ' << t;
  out << '\n';
}

}  // namespace eikcouple
