#pragma once

// Purkinje-muscle coupling: junction registry, junction classification and
// the partitioned network/muscle fixed-point loop.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "eikcouple/eikonal_diffusion.hpp"
#include "eikcouple/errors.hpp"
#include "eikcouple/mesh.hpp"
#include "eikcouple/network.hpp"

namespace eikcouple {

enum class PmjType {
  orthodromic_from_avn,         ///< OO
  orthodromic_from_antidromic,  ///< OA
  antidromic,                   ///< A
  collision,                    ///< C
};

inline const char* to_string(PmjType t) {
  switch (t) {
    case PmjType::orthodromic_from_avn: return "OO";
    case PmjType::orthodromic_from_antidromic: return "OA";
    case PmjType::antidromic: return "A";
    case PmjType::collision: return "C";
  }
  return "?";
}

inline bool is_orthodromic(PmjType t) {
  return t == PmjType::orthodromic_from_avn || t == PmjType::orthodromic_from_antidromic;
}

/// Junction decision at one PMJ. Antidromic when u_p >= u_m + d_a,
/// orthodromic when u_p <= u_m - d_o, collision otherwise; an entry
/// unreached on both sides is a collision. `from_avn` splits orthodromic
/// junctions into OO and OA. `tol` widens both inequalities so that times
/// known only to solver accuracy still hit their ties.
inline PmjType classify_pmj(double u_p, double u_m, double d_o, double d_a, bool from_avn, double tol = 0.0) {
  if (std::isinf(u_p) && std::isinf(u_m)) return PmjType::collision;
  if (u_p >= u_m + d_a - tol) return PmjType::antidromic;
  if (u_p <= u_m - d_o + tol) return from_avn ? PmjType::orthodromic_from_avn : PmjType::orthodromic_from_antidromic;
  return PmjType::collision;
}

struct PmjEntry {
  Index terminal = 0;          ///< network node
  Index vertex = 0;            ///< mesh vertex
  double snap_distance = 0.0;  ///< [m]
  double d_o = 10e-3;          ///< orthodromic delay [s]
  double d_a = 2e-3;           ///< antidromic delay [s]
  PmjType type = PmjType::collision;
  double u_p = kInfinity;      ///< times used by the last classification [s]
  double u_m = kInfinity;
  Index origin = kNoIndex;     ///< network source whose front set u_p
};

struct PmjCounts {
  std::size_t oo = 0, oa = 0, antidromic = 0, collision = 0;
  std::size_t total() const { return oo + oa + antidromic + collision; }
  bool operator==(const PmjCounts&) const = default;
};

struct PmjRegistry {
  std::vector<PmjEntry> entries;

  std::size_t size() const { return entries.size(); }

  PmjCounts counts() const {
    PmjCounts c;
    for (const auto& e : entries) switch (e.type) {
        case PmjType::orthodromic_from_avn: ++c.oo; break;
        case PmjType::orthodromic_from_antidromic: ++c.oa; break;
        case PmjType::antidromic: ++c.antidromic; break;
        case PmjType::collision: ++c.collision; break;
      }
    return c;
  }

  std::vector<PmjType> types() const {
    std::vector<PmjType> t;
    t.reserve(entries.size());
    for (const auto& e : entries) t.push_back(e.type);
    return t;
  }

  void validate(const ConductionNetwork& net, const SimplicialMesh& mesh) const {
    std::vector<char> term(net.num_nodes(), 0), vert(mesh.num_vertices(), 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      const std::string id = "PMJ " + std::to_string(i);
      if (e.terminal >= net.num_nodes() || e.vertex >= mesh.num_vertices())
        throw ValidationError(id + " references an index out of range", i);
      if (term[e.terminal]++ || vert[e.vertex]++)
        throw ValidationError(id + " shares its terminal or vertex with another PMJ", i);
      if (!(e.d_a > 0.0) || !(e.d_o > e.d_a))
        throw ValidationError(id + " delays must satisfy d_o > d_a > 0", i);
    }
  }
};

/// Pairs every network terminal with its nearest mesh vertex. When that
/// vertex is already taken the terminal gets the nearest free one. Ties go
/// to the lower vertex index. `snap_radius` <= 0 means twice the average
/// mesh edge length.
inline PmjRegistry match_pmjs(const ConductionNetwork& net, const SimplicialMesh& mesh, double d_o, double d_a,
                              double snap_radius = 0.0) {
  if (snap_radius <= 0.0) snap_radius = 2.0 * mesh.average_edge_length();
  std::vector<char> taken(mesh.num_vertices(), 0);
  PmjRegistry reg;
  for (Index t : net.terminal_nodes()) {
    const Point& p = net.node(t);
    Index best = kNoIndex;
    double best_d = kInfinity;
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (taken[v]) continue;
      const double d = distance(p, mesh.vertex(v));
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    if (best == kNoIndex || best_d > snap_radius)
      throw ValidationError("terminal " + std::to_string(t) + " lies " + std::to_string(best_d) +
                                " m from the nearest free mesh vertex (snap radius " + std::to_string(snap_radius) +
                                " m)",
                            t);
    taken[best] = 1;
    reg.entries.push_back({t, best, best_d, d_o, d_a});
  }
  reg.validate(net, mesh);
  return reg;
}

/// Reclassifies every registry entry from the current network and muscle
/// times. An orthodromic junction is OA when its network time was set by a
/// front that did not start at `avn`.
inline void classify_pmjs(PmjRegistry& reg, const NodeActivation& u_p, const NodalField& u_m, Index avn,
                          double tol = 0.0) {
  for (auto& e : reg.entries) {
    e.u_p = u_p.times[e.terminal];
    e.u_m = u_m.empty() ? kInfinity : u_m[e.vertex];
    e.origin = u_p.origin[e.terminal];
    e.type = classify_pmj(e.u_p, e.u_m, e.d_o, e.d_a, e.origin == avn, tol);
  }
}

struct CouplingOptions {
  int n_max = 3;
  bool early_stop = true;  ///< stop once two consecutive iterations classify identically
  double tie_tolerance = 1e-6;  ///< classification slack [s]; muscle times are accurate to about steady_tol
  SolverOptions solver;
  std::ostream* log = nullptr;
};

struct IterationRecord {
  int iteration = 0;
  MuscleStimulusSet muscle_stimuli;             ///< input of the muscle solve
  SolveResult muscle;                           ///< without the field itself
  std::vector<NetworkSource> network_sources;   ///< input of the network solve
  PmjRegistry after_muscle;                     ///< classification after the muscle solve
  PmjRegistry registry;                         ///< classification at the end of the iteration
};

struct CouplingState {
  NodeActivation u_p;
  NodalField u_m;
  PmjRegistry registry;
  PmjRegistry initial;  ///< classification of the AVN-only network solve
  int iterations = 0;
  std::vector<IterationRecord> history;
  bool fixed_point = false;  ///< last two iterations classified identically
};

/// Partitioned network/muscle iteration.
///
///   u_p <- network(AVN); classify with u_m = +inf
///   repeat n_max times:
///     u_m <- muscle(muscular sources + orthodromic PMJs at u_p + d_o); classify
///     u_p <- network(AVN + antidromic PMJs at u_m + d_a);             classify
///
/// Collision junctions feed neither side. The muscle is solved from scratch
/// every iteration.
inline CouplingState couple(const ConductionNetwork& net, const EikonalDiffusionSolver& muscle, PmjRegistry registry,
                            double avn_time, const MuscleStimulusSet& muscular_sources,
                            const CouplingOptions& opt = {}) {
  if (opt.n_max < 1) throw ValidationError("n_max must be >= 1");
  if (!std::isfinite(avn_time)) throw ValidationError("AV node time must be finite");
  const auto& mesh = muscle.op().mesh();
  registry.validate(net, mesh);
  muscular_sources.validate(mesh);
  const Index avn = net.avn_node();

  auto network_solve = [&](std::vector<NetworkSource> sources) {
    NetworkSourceSet set{std::move(sources), -kInfinity};
    return solve_network(net, set);
  };

  CouplingState st;
  st.u_p = network_solve({{avn, avn_time}});
  classify_pmjs(registry, st.u_p, {}, avn);
  st.initial = registry;

  for (int it = 1; it <= opt.n_max; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    rec.muscle_stimuli = muscular_sources;
    for (const auto& e : registry.entries)
      if (is_orthodromic(e.type)) rec.muscle_stimuli.stimuli.push_back({e.vertex, e.u_p + e.d_o, StimulusOrigin::pmj});
    if (rec.muscle_stimuli.empty())
      throw SolverError("coupling iteration " + std::to_string(it) +
                        ": the muscle has no stimulus (no muscular source and no orthodromic PMJ)");
    try {
      rec.muscle = muscle.solve(rec.muscle_stimuli, opt.solver);
    } catch (const SolverError& e) {
      throw SolverError("coupling iteration " + std::to_string(it) + ", muscle solve: " + e.what());
    }
    st.u_m = std::move(rec.muscle.u);
    rec.muscle.u.clear();
    classify_pmjs(registry, st.u_p, st.u_m, avn, opt.tie_tolerance);
    rec.after_muscle = registry;

    rec.network_sources.push_back({avn, avn_time});
    for (const auto& e : registry.entries)
      if (e.type == PmjType::antidromic) rec.network_sources.push_back({e.terminal, e.u_m + e.d_a});
    st.u_p = network_solve(rec.network_sources);
    classify_pmjs(registry, st.u_p, st.u_m, avn, opt.tie_tolerance);
    rec.registry = registry;

    if (opt.log) {
      const auto c = registry.counts();
      *opt.log << "coupling iteration " << it << ": muscle steps=" << rec.muscle.steps
               << " stimuli=" << rec.muscle_stimuli.size() << " network sources=" << rec.network_sources.size()
               << " OO=" << c.oo << " OA=" << c.oa << " A=" << c.antidromic << " C=" << c.collision << '\n';
    }

    const bool same = !st.history.empty() && st.history.back().registry.types() == registry.types();
    st.history.push_back(std::move(rec));
    st.iterations = it;
    st.fixed_point = same;
    if (same && opt.early_stop) break;
  }
  st.registry = std::move(registry);
  return st;
}

}  // namespace eikcouple
