#pragma once

// Scenario configuration (YAML), model construction, a full coupled run and
// the files it writes.
//
// All quantities are SI: meters, seconds, m^2/s. Output times are in ms.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "eikcouple/coupling.hpp"
#include "eikcouple/eikonal_diffusion.hpp"
#include "eikcouple/errors.hpp"
#include "eikcouple/mesh.hpp"
#include "eikcouple/mesh_io.hpp"
#include "eikcouple/network.hpp"

namespace eikcouple {

struct SlabSpec {
  int dim = 3;
  std::array<double, 3> lengths{0.04, 0.02, 0.002};
  std::array<int, 3> divisions{40, 20, 2};
};

struct MuscularSourceConfig {
  Point center{};
  double radius = 0.0;  ///< 0 means the single nearest vertex
  double time = 0.0;
  StimulusOrigin tag = StimulusOrigin::ectopic;
};

struct PmjDelayOverride {
  Index terminal = 0;
  std::optional<double> d_o, d_a;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path base_dir = ".";  ///< relative file paths resolve against this

  std::optional<std::string> mesh_file;
  SlabSpec slab;

  std::optional<std::string> fiber_file;
  std::array<int, 3> fiber_axes{0, 1, 2};

  std::optional<std::string> network_file;
  TreeSpec tree{.depth = 3, .segment_length = 6e-3, .branch_angle = 1.2, .root = {0.02, 0.019, 0.002}};  ///< fits the default slab
  double snap_radius = 0.0;  ///< 0: twice the average mesh edge

  ConductivityModel muscle;
  std::optional<double> c_p;  ///< unset: 4 m/s for a generated tree, the file value otherwise
  double d_o = 10e-3;
  double d_a = 2e-3;
  std::vector<PmjDelayOverride> pmj_delays;

  double avn_time = 0.0;
  std::vector<MuscularSourceConfig> muscular_sources;
  std::set<Index> blocked_edges;

  SolverOptions solver;
  CouplingOptions coupling;

  std::string output_dir = "output";
  std::uint64_t seed = 0;
  int threads = 1;

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

namespace detail {

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

/// Reads typed values out of a YAML map and rejects unknown keys.
class MapReader {
 public:
  MapReader(const YAML::Node& node, std::string path)
      : node_(node), path_(std::move(path)), present_(node_ && !node_.IsNull()) {
    if (present_ && !node_.IsMap()) throw ValidationError(where() + "expected a mapping");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    try {
      out = get(key).as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError(join_path(path_, key) + ": invalid value");
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    used_.insert(key);
    if (!has(key)) return;
    T v{};
    read(key, v);
    out = v;
  }

  YAML::Node child(const std::string& key) {
    used_.insert(key);
    return has(key) ? get(key) : YAML::Node();
  }

  bool has(const std::string& key) const { return present_ && get(key) && !get(key).IsNull(); }
  std::string path(const std::string& key) const { return join_path(path_, key); }

  void finish() const {
    if (!present_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.contains(key)) throw ValidationError(join_path(path_, key) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  // Const access: operator[] on a mutable node inserts missing keys.
  YAML::Node get(const std::string& key) const {
    const YAML::Node& n = node_;
    return n[key];
  }
  YAML::Node node_;
  std::string path_;
  bool present_;
  std::set<std::string> used_;
};

template <class T, std::size_t N>
std::array<T, N> read_array(const YAML::Node& n, const std::string& path, std::size_t min_len = N) {
  if (!n.IsSequence() || n.size() < min_len || n.size() > N)
    throw ValidationError(path + ": expected a list of " + (min_len == N ? "" : std::to_string(min_len) + " to ") +
                          std::to_string(N) + " values");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < n.size(); ++i) try {
      out[i] = n[i].as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError(path + "[" + std::to_string(i) + "]: invalid value");
    }
  return out;
}

inline PseudoTimeMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "novel") return PseudoTimeMode::novel;
  if (s == "classic") return PseudoTimeMode::classic;
  throw ValidationError(path + ": expected 'novel' or 'classic'");
}

inline StimulusOrigin parse_tag(const std::string& s, const std::string& path) {
  if (s == "ectopic") return StimulusOrigin::ectopic;
  if (s == "lead") return StimulusOrigin::lead;
  throw ValidationError(path + ": expected 'ectopic' or 'lead'");
}

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path + ": " + what);
}

}  // namespace detail

/// Parses a scenario from YAML text. `base_dir` anchors relative file paths.
inline ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  detail::MapReader top(root, "");
  top.read("name", cfg.name);
  top.read("avn_time", cfg.avn_time);
  top.read("seed", cfg.seed);
  top.read("threads", cfg.threads);
  detail::require(cfg.threads >= 1, "threads", "must be >= 1");

  {
    detail::MapReader m(top.child("mesh"), "mesh");
    m.read("file", cfg.mesh_file);
    detail::MapReader s(m.child("slab"), "mesh.slab");
    s.read("dim", cfg.slab.dim);
    detail::require(cfg.slab.dim >= 1 && cfg.slab.dim <= 3, "mesh.slab.dim", "must be 1, 2 or 3");
    if (s.has("lengths")) {
      const auto l = detail::read_array<double, 3>(s.child("lengths"), s.path("lengths"), 1);
      for (std::size_t i = 0; i < 3; ++i) cfg.slab.lengths[i] = l[i];
    }
    if (s.has("divisions")) {
      const auto d = detail::read_array<long long, 3>(s.child("divisions"), s.path("divisions"), 1);
      for (std::size_t i = 0; i < 3; ++i) {
        detail::require(d[i] >= 0 && d[i] <= 100000, "mesh.slab.divisions", "must be between 1 and 100000");
        cfg.slab.divisions[i] = static_cast<int>(d[i]);
      }
    }
    for (int i = 0; i < cfg.slab.dim; ++i) {
      detail::require(cfg.slab.lengths[static_cast<std::size_t>(i)] > 0.0, "mesh.slab.lengths", "must be > 0");
      detail::require(cfg.slab.divisions[static_cast<std::size_t>(i)] >= 1, "mesh.slab.divisions", "must be >= 1");
    }
    s.finish();
    m.finish();
  }
  {
    detail::MapReader f(top.child("fibers"), "fibers");
    f.read("file", cfg.fiber_file);
    if (f.has("axes")) cfg.fiber_axes = detail::read_array<int, 3>(f.child("axes"), f.path("axes"), 1);
    f.finish();
  }
  {
    detail::MapReader n(top.child("network"), "network");
    n.read("file", cfg.network_file);
    n.read("snap_radius", cfg.snap_radius);
    detail::require(cfg.snap_radius >= 0.0, "network.snap_radius", "must be >= 0");
    detail::MapReader t(n.child("tree"), "network.tree");
    t.read("depth", cfg.tree.depth);
    t.read("segment_length", cfg.tree.segment_length);
    t.read("length_ratio", cfg.tree.length_ratio);
    t.read("branch_angle", cfg.tree.branch_angle);
    t.read("heading", cfg.tree.heading);
    t.read("angle_jitter", cfg.tree.angle_jitter);
    if (t.has("root")) cfg.tree.root = detail::read_array<double, 3>(t.child("root"), t.path("root"), 2);
    detail::require(cfg.tree.depth >= 1 && cfg.tree.depth <= 20, "network.tree.depth", "must be between 1 and 20");
    detail::require(cfg.tree.segment_length > 0.0, "network.tree.segment_length", "must be > 0");
    detail::require(cfg.tree.length_ratio > 0.0, "network.tree.length_ratio", "must be > 0");
    detail::require(cfg.tree.angle_jitter >= 0.0, "network.tree.angle_jitter", "must be >= 0");
    t.finish();
    n.finish();
  }
  {
    detail::MapReader p(top.child("physics"), "physics");
    p.read("sigma_f", cfg.muscle.sigma_f);
    p.read("sigma_s", cfg.muscle.sigma_s);
    p.read("sigma_n", cfg.muscle.sigma_n);
    p.read("chi_cm", cfg.muscle.chi_cm);
    p.read("c_f", cfg.muscle.c_f);
    p.read("c_p", cfg.c_p);
    p.read("d_o", cfg.d_o);
    p.read("d_a", cfg.d_a);
    try {
      cfg.muscle.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("physics: ") + e.what());
    }
    if (cfg.c_p) detail::require(*cfg.c_p > 0.0, "physics.c_p", "must be > 0");
    detail::require(cfg.d_a > 0.0 && cfg.d_o > cfg.d_a, "physics", "delays must satisfy d_o > d_a > 0");
    p.finish();
  }
  if (const auto list = top.child("pmj_delays"); top.has("pmj_delays")) {
    detail::require(list.IsSequence(), "pmj_delays", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "pmj_delays[" + std::to_string(i) + "]";
      detail::MapReader r(list[i], path);
      PmjDelayOverride o;
      detail::require(r.has("terminal"), path, "missing 'terminal'");
      r.read("terminal", o.terminal);
      r.read("d_o", o.d_o);
      r.read("d_a", o.d_a);
      r.finish();
      cfg.pmj_delays.push_back(o);
    }
  }
  if (const auto list = top.child("muscular_sources"); top.has("muscular_sources")) {
    detail::require(list.IsSequence(), "muscular_sources", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "muscular_sources[" + std::to_string(i) + "]";
      detail::MapReader r(list[i], path);
      MuscularSourceConfig s;
      detail::require(r.has("center") && r.has("time"), path, "'center' and 'time' are required");
      s.center = detail::read_array<double, 3>(r.child("center"), r.path("center"), 1);
      r.read("radius", s.radius);
      r.read("time", s.time);
      std::string tag = "ectopic";
      r.read("tag", tag);
      s.tag = detail::parse_tag(tag, r.path("tag"));
      detail::require(s.radius >= 0.0, r.path("radius"), "must be >= 0");
      detail::require(std::isfinite(s.time), r.path("time"), "must be finite");
      r.finish();
      cfg.muscular_sources.push_back(s);
    }
  }
  if (const auto list = top.child("blocked_edges"); top.has("blocked_edges")) {
    detail::require(list.IsSequence(), "blocked_edges", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) try {
        cfg.blocked_edges.insert(list[i].as<Index>());
      } catch (const YAML::Exception&) {
        throw ValidationError("blocked_edges[" + std::to_string(i) + "]: invalid edge index");
      }
  }
  {
    detail::MapReader s(top.child("solver"), "solver");
    auto& o = cfg.solver;
    s.read("dt", o.dt);
    s.read("bdf_order", o.bdf_order);
    s.read("newton_tol", o.newton_tol);
    s.read("newton_max_iter", o.newton_max_iter);
    s.read("divergence_window", o.divergence_window);
    s.read("linear_tol", o.linear_tol);
    s.read("steady_tol", o.steady_tol);
    s.read("max_pseudo_steps", o.max_pseudo_steps);
    s.read("grad_regularization", o.grad_regularization);
    s.read("stabilization", o.stabilization);
    s.read("u_init", o.u_init);
    std::string mode = to_string(o.mode);
    s.read("mode", mode);
    o.mode = detail::parse_mode(mode, "solver.mode");
    try {
      o.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("solver: ") + e.what());
    }
    s.finish();
  }
  {
    detail::MapReader c(top.child("coupling"), "coupling");
    c.read("n_max", cfg.coupling.n_max);
    c.read("early_stop", cfg.coupling.early_stop);
    c.read("tie_tolerance", cfg.coupling.tie_tolerance);
    detail::require(cfg.coupling.n_max >= 1, "coupling.n_max", "must be >= 1");
    detail::require(cfg.coupling.tie_tolerance >= 0.0 && cfg.coupling.tie_tolerance < cfg.d_a,
                    "coupling.tie_tolerance", "must be >= 0 and below d_a");
    c.finish();
  }
  {
    detail::MapReader o(top.child("output"), "output");
    o.read("dir", cfg.output_dir);
    o.finish();
  }
  top.finish();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::absolute(path).parent_path();
  try {
    return parse_scenario(ss.str(), dir);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

/// Fiber file: first line the cell count, then one line per cell with the
/// nine components f0 s0 n0. Unused directions of lower-dimensional meshes
/// are written as zeros.
inline FiberField read_fibers(const std::string& path, int dim) {
  detail::TokenStream ts(path, detail::read_file(path));
  const std::size_t n = ts.count("cell count");
  std::vector<FiberField::Triad> triads(n);
  for (auto& t : triads)
    for (auto& v : t)
      for (auto& x : v) x = ts.number("fiber component");
  if (!ts.done()) throw ParseError(path, ts.line(), "unexpected data after the last triad");
  try {
    return FiberField(dim, std::move(triads));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what(), e.entity());
  }
}

inline void write_fibers(const std::string& path, const FiberField& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << f.size() << '\n';
  for (const auto& t : f.triads()) {
    bool first = true;
    for (const auto& v : t)
      for (double x : v) {
        out << (first ? "" : " ") << format_number(x, kCoordinateDigits);
        first = false;
      }
    out << '\n';
  }
}

/// Everything a run needs, built and validated from a config.
struct ScenarioModel {
  SimplicialMesh mesh;
  FiberField fibers;
  ConductionNetwork network;  ///< blocks applied
  PmjRegistry registry;
  MuscleStimulusSet muscular;
};

inline ScenarioModel build_model(const ScenarioConfig& cfg) {
  ScenarioModel m;
  if (cfg.mesh_file) {
    m.mesh = load_mesh(cfg.resolve(*cfg.mesh_file).string());
  } else {
    const auto d = static_cast<std::size_t>(cfg.slab.dim);
    m.mesh = build_structured_slab(cfg.slab.dim, std::span(cfg.slab.lengths.data(), d),
                                   std::span(cfg.slab.divisions.data(), d));
  }
  if (cfg.fiber_file) {
    m.fibers = read_fibers(cfg.resolve(*cfg.fiber_file).string(), m.mesh.dim());
    if (m.fibers.size() != m.mesh.num_cells())
      throw ValidationError("fibers.file: " + std::to_string(m.fibers.size()) + " triads for " +
                            std::to_string(m.mesh.num_cells()) + " cells");
  } else {
    try {
      m.fibers = FiberField::axis_aligned(m.mesh.dim(), m.mesh.num_cells(), cfg.fiber_axes);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("fibers.axes: ") + e.what());
    }
  }

  ConductionNetwork net;
  if (cfg.network_file) {
    net = read_network(cfg.resolve(*cfg.network_file).string());
  } else {
    TreeSpec spec = cfg.tree;
    spec.seed = cfg.seed;
    spec.conduction_velocity = cfg.c_p.value_or(4.0);
    net = build_synthetic_tree(spec);
  }
  if (cfg.c_p && *cfg.c_p != net.conduction_velocity())
    net = ConductionNetwork(net.nodes(), net.edges(), *cfg.c_p, net.avn_node(), net.terminal_nodes(),
                            net.blocked_edges());
  for (Index e : cfg.blocked_edges)
    if (e >= net.num_edges())
      throw ValidationError("blocked_edges: edge " + std::to_string(e) + " out of range (network has " +
                            std::to_string(net.num_edges()) + " edges)");
  m.network = apply_blocks(net, cfg.blocked_edges);

  m.registry = match_pmjs(m.network, m.mesh, cfg.d_o, cfg.d_a, cfg.snap_radius);
  for (std::size_t i = 0; i < cfg.pmj_delays.size(); ++i) {
    const auto& o = cfg.pmj_delays[i];
    auto it = std::find_if(m.registry.entries.begin(), m.registry.entries.end(),
                           [&](const PmjEntry& e) { return e.terminal == o.terminal; });
    if (it == m.registry.entries.end())
      throw ValidationError("pmj_delays[" + std::to_string(i) + "].terminal: node " + std::to_string(o.terminal) +
                            " is not a terminal");
    if (o.d_o) it->d_o = *o.d_o;
    if (o.d_a) it->d_a = *o.d_a;
  }
  try {
    m.registry.validate(m.network, m.mesh);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("pmj_delays: ") + e.what());
  }

  for (const auto& s : cfg.muscular_sources) {
    if (s.radius > 0.0)
      m.muscular.add_sphere(m.mesh, s.center, s.radius, s.time, s.tag);
    else
      m.muscular.add_point(m.mesh, s.center, s.time, s.tag);
  }
  return m;
}

/// Activation statistics in milliseconds plus junction counts.
struct RunSummary {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;  ///< population standard deviation
  double tat_ms = 0.0;     ///< latest activation
  double eat_ms = 0.0;     ///< earliest activation
  PmjCounts counts;
  std::size_t pmjs = 0;
  std::size_t vertices = 0;
  int iterations = 0;
  bool fixed_point = false;
  double wall_clock_s = 0.0;
};

inline RunSummary summarize(const ActivationField& u_m, const PmjRegistry& registry) {
  if (u_m.empty()) throw ValidationError("activation field is empty");
  std::size_t unreached = 0;
  for (double x : u_m)
    if (!std::isfinite(x)) ++unreached;
  if (unreached)
    throw SolverError(std::to_string(unreached) + " of " + std::to_string(u_m.size()) +
                      " muscle vertices were never activated");
  RunSummary s;
  s.vertices = u_m.size();
  double sum = 0.0;
  s.eat_ms = kInfinity;
  s.tat_ms = -kInfinity;
  for (double x : u_m) {
    const double ms = x * 1e3;
    sum += ms;
    s.eat_ms = std::min(s.eat_ms, ms);
    s.tat_ms = std::max(s.tat_ms, ms);
  }
  s.mean_ms = sum / static_cast<double>(u_m.size());
  double sq = 0.0;
  for (double x : u_m) sq += (x * 1e3 - s.mean_ms) * (x * 1e3 - s.mean_ms);
  s.stddev_ms = std::sqrt(sq / static_cast<double>(u_m.size()));
  s.counts = registry.counts();
  s.pmjs = registry.size();
  return s;
}

/// Effective configuration with every default resolved, as YAML.
inline std::string effective_config(const ScenarioConfig& cfg, const ScenarioModel* model = nullptr) {
  auto num = [](double x) { return format_number(x, kCoordinateDigits); };
  YAML::Emitter y;
  y << YAML::BeginMap;
  y << YAML::Key << "name" << YAML::Value << cfg.name;
  y << YAML::Key << "seed" << YAML::Value << cfg.seed;
  y << YAML::Key << "threads" << YAML::Value << cfg.threads;
  y << YAML::Key << "avn_time" << YAML::Value << num(cfg.avn_time);

  y << YAML::Key << "mesh" << YAML::Value << YAML::BeginMap;
  if (cfg.mesh_file) {
    y << YAML::Key << "file" << YAML::Value << cfg.resolve(*cfg.mesh_file).string();
  } else {
    const auto d = static_cast<std::size_t>(cfg.slab.dim);
    y << YAML::Key << "slab" << YAML::Value << YAML::BeginMap;
    y << YAML::Key << "dim" << YAML::Value << cfg.slab.dim;
    y << YAML::Key << "lengths" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (std::size_t i = 0; i < d; ++i) y << num(cfg.slab.lengths[i]);
    y << YAML::EndSeq;
    y << YAML::Key << "divisions" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (std::size_t i = 0; i < d; ++i) y << cfg.slab.divisions[i];
    y << YAML::EndSeq << YAML::EndMap;
  }
  y << YAML::EndMap;

  y << YAML::Key << "fibers" << YAML::Value << YAML::BeginMap;
  if (cfg.fiber_file)
    y << YAML::Key << "file" << YAML::Value << cfg.resolve(*cfg.fiber_file).string();
  else
    y << YAML::Key << "axes" << YAML::Value << YAML::Flow << YAML::BeginSeq << cfg.fiber_axes[0] << cfg.fiber_axes[1]
      << cfg.fiber_axes[2] << YAML::EndSeq;
  y << YAML::EndMap;

  y << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  if (cfg.network_file) {
    y << YAML::Key << "file" << YAML::Value << cfg.resolve(*cfg.network_file).string();
  } else {
    const auto& t = cfg.tree;
    y << YAML::Key << "tree" << YAML::Value << YAML::BeginMap;
    y << YAML::Key << "depth" << YAML::Value << t.depth;
    y << YAML::Key << "segment_length" << YAML::Value << num(t.segment_length);
    y << YAML::Key << "length_ratio" << YAML::Value << num(t.length_ratio);
    y << YAML::Key << "branch_angle" << YAML::Value << num(t.branch_angle);
    y << YAML::Key << "heading" << YAML::Value << num(t.heading);
    y << YAML::Key << "angle_jitter" << YAML::Value << num(t.angle_jitter);
    y << YAML::Key << "root" << YAML::Value << YAML::Flow << YAML::BeginSeq << num(t.root[0]) << num(t.root[1])
      << num(t.root[2]) << YAML::EndSeq;
    y << YAML::EndMap;
  }
  y << YAML::Key << "snap_radius" << YAML::Value
    << num(cfg.snap_radius > 0.0 || !model ? cfg.snap_radius : 2.0 * model->mesh.average_edge_length());
  y << YAML::EndMap;

  y << YAML::Key << "physics" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "sigma_f" << YAML::Value << num(cfg.muscle.sigma_f);
  y << YAML::Key << "sigma_s" << YAML::Value << num(cfg.muscle.sigma_s);
  y << YAML::Key << "sigma_n" << YAML::Value << num(cfg.muscle.sigma_n);
  y << YAML::Key << "chi_cm" << YAML::Value << num(cfg.muscle.chi_cm);
  y << YAML::Key << "c_f" << YAML::Value << num(cfg.muscle.c_f);
  const double c_p = model ? model->network.conduction_velocity() : cfg.c_p.value_or(4.0);
  y << YAML::Key << "c_p" << YAML::Value << num(c_p);
  y << YAML::Key << "d_o" << YAML::Value << num(cfg.d_o);
  y << YAML::Key << "d_a" << YAML::Value << num(cfg.d_a);
  y << YAML::EndMap;

  if (!cfg.pmj_delays.empty()) {
    y << YAML::Key << "pmj_delays" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : cfg.pmj_delays) {
      y << YAML::Flow << YAML::BeginMap << YAML::Key << "terminal" << YAML::Value << o.terminal;
      if (o.d_o) y << YAML::Key << "d_o" << YAML::Value << num(*o.d_o);
      if (o.d_a) y << YAML::Key << "d_a" << YAML::Value << num(*o.d_a);
      y << YAML::EndMap;
    }
    y << YAML::EndSeq;
  }

  y << YAML::Key << "muscular_sources" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.muscular_sources) {
    y << YAML::Flow << YAML::BeginMap;
    y << YAML::Key << "center" << YAML::Value << YAML::Flow << YAML::BeginSeq << num(s.center[0]) << num(s.center[1])
      << num(s.center[2]) << YAML::EndSeq;
    y << YAML::Key << "radius" << YAML::Value << num(s.radius);
    y << YAML::Key << "time" << YAML::Value << num(s.time);
    y << YAML::Key << "tag" << YAML::Value << to_string(s.tag);
    y << YAML::EndMap;
  }
  y << YAML::EndSeq;

  y << YAML::Key << "blocked_edges" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Index e : cfg.blocked_edges) y << e;
  y << YAML::EndSeq;

  const auto& o = cfg.solver;
  y << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "mode" << YAML::Value << to_string(o.mode);
  y << YAML::Key << "dt" << YAML::Value << num(o.dt);
  y << YAML::Key << "bdf_order" << YAML::Value << o.bdf_order;
  y << YAML::Key << "newton_tol" << YAML::Value << num(o.newton_tol);
  y << YAML::Key << "newton_max_iter" << YAML::Value << o.newton_max_iter;
  y << YAML::Key << "divergence_window" << YAML::Value << o.divergence_window;
  y << YAML::Key << "linear_tol" << YAML::Value << num(o.linear_tol);
  y << YAML::Key << "steady_tol" << YAML::Value << num(o.steady_tol);
  y << YAML::Key << "max_pseudo_steps" << YAML::Value << o.max_pseudo_steps;
  y << YAML::Key << "grad_regularization" << YAML::Value << num(o.grad_regularization);
  y << YAML::Key << "stabilization" << YAML::Value << num(o.stabilization);
  if (o.u_init) y << YAML::Key << "u_init" << YAML::Value << num(*o.u_init);
  y << YAML::EndMap;

  y << YAML::Key << "coupling" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "n_max" << YAML::Value << cfg.coupling.n_max;
  y << YAML::Key << "early_stop" << YAML::Value << cfg.coupling.early_stop;
  y << YAML::Key << "tie_tolerance" << YAML::Value << num(cfg.coupling.tie_tolerance);
  y << YAML::EndMap;

  y << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  y << YAML::Key << "dir" << YAML::Value << cfg.output_dir;
  y << YAML::EndMap;
  y << YAML::EndMap;
  return std::string(y.c_str()) + "\n";
}

inline void write_summary(const std::string& path, const RunSummary& s, const std::string& name) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  auto ms = [](double x) { return format_number(x, kTimeDigits); };
  out << "scenario: " << name << '\n'
      << "vertices: " << s.vertices << '\n'
      << "mean_ms: " << ms(s.mean_ms) << '\n'
      << "stddev_ms: " << ms(s.stddev_ms) << '\n'
      << "tat_ms: " << ms(s.tat_ms) << '\n'
      << "eat_ms: " << ms(s.eat_ms) << '\n'
      << "pmjs: " << s.pmjs << '\n'
      << "OO: " << s.counts.oo << '\n'
      << "OA: " << s.counts.oa << '\n'
      << "A: " << s.counts.antidromic << '\n'
      << "C: " << s.counts.collision << '\n'
      << "iterations: " << s.iterations << '\n'
      << "fixed_point: " << (s.fixed_point ? "true" : "false") << '\n'
      << "wall_clock_s: " << format_number(s.wall_clock_s, 6) << '\n';
}

inline void write_pmj_csv(const std::string& path, const CouplingState& st) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "iteration,pmj_id,terminal,vertex,u_p_ms,u_m_ms,type\n";
  auto dump = [&](int it, const PmjRegistry& reg) {
    for (std::size_t i = 0; i < reg.entries.size(); ++i) {
      const auto& e = reg.entries[i];
      out << it << ',' << i << ',' << e.terminal << ',' << e.vertex << ',' << format_number(e.u_p * 1e3, kTimeDigits)
          << ',' << format_number(e.u_m * 1e3, kTimeDigits) << ',' << to_string(e.type) << '\n';
    }
  };
  dump(0, st.initial);
  for (const auto& rec : st.history) dump(rec.iteration, rec.registry);
}

/// `node,x,y,z,u_ms,origin` where origin is the source node of the
/// winning front (-1 when unreached).
inline void write_network_csv(const std::string& path, const ConductionNetwork& net, const NodeActivation& u_p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "node,x,y,z,u_ms,origin\n";
  for (Index v = 0; v < net.num_nodes(); ++v) {
    const auto& p = net.node(v);
    out << v << ',' << format_number(p[0], kCoordinateDigits) << ',' << format_number(p[1], kCoordinateDigits) << ','
        << format_number(p[2], kCoordinateDigits) << ',' << format_number(u_p.times[v] * 1e3, kTimeDigits) << ',';
    if (u_p.origin[v] == kNoIndex)
      out << -1;
    else
      out << u_p.origin[v];
    out << '\n';
  }
}

struct RunResult {
  RunSummary summary;
  CouplingState state;
  std::filesystem::path output_dir;
};

/// Builds the model, runs the coupled solver and writes
///   activation.vtk, activation.csv, pmj_classification.csv,
///   network_activation.csv, summary.txt, effective_config.yaml
/// into the output directory (relative paths resolve against the config).
inline RunResult run_scenario(const ScenarioConfig& cfg, std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioModel model = build_model(cfg);
  EikonalDiffusionSolver muscle(model.mesh, build_conductivity(cfg.muscle, model.fibers), cfg.muscle.c_f,
                                cfg.solver.grad_regularization, cfg.solver.stabilization);
  muscle.set_threads(cfg.threads);
  CouplingOptions copt = cfg.coupling;
  copt.solver = cfg.solver;
  copt.log = log;

  RunResult res;
  res.output_dir = cfg.resolve(cfg.output_dir);
  std::filesystem::create_directories(res.output_dir);
  {
    std::ofstream echo(res.output_dir / "effective_config.yaml");
    if (!echo) throw Error("cannot write " + (res.output_dir / "effective_config.yaml").string());
    echo << effective_config(cfg, &model);
  }

  res.state = couple(model.network, muscle, model.registry, cfg.avn_time, model.muscular, copt);
  res.summary = summarize(res.state.u_m, res.state.registry);
  res.summary.iterations = res.state.iterations;
  res.summary.fixed_point = res.state.fixed_point;

  const auto ms = to_milliseconds(res.state.u_m);
  const auto dir = res.output_dir;
  write_vtk((dir / "activation.vtk").string(), model.mesh, {{"activation_time_ms", &ms}}, cfg.name);
  write_activation_csv((dir / "activation.csv").string(), model.mesh, res.state.u_m);
  write_pmj_csv((dir / "pmj_classification.csv").string(), res.state);
  write_network_csv((dir / "network_activation.csv").string(), model.network, res.state.u_p);
  res.summary.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_summary((dir / "summary.txt").string(), res.summary, cfg.name);
  return res;
}

}  // namespace eikcouple
