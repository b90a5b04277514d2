#pragma once

/**
 * @file eikonal_diffusion.hpp
 * @brief Eikonal-diffusion activation solver for the myocardium.
 *
 * Steady problem, S the anisotropic conductivity tensor:
 *
 *   c_f sqrt(grad u . S grad u) - div(S grad u) = 1   in the muscle,
 *   (S grad u) . n = 0 on the boundary,   u = u0 on the stimulus set.
 *
 * It is reached as the steady state of an implicit BDF pseudo-time march.
 * In the default (`novel`) mode the Dirichlet set of each step contains
 * only the *active* stimuli: those whose prescribed time lies before the
 * pseudo-time clock and before the current solution at their vertex. A
 * stimulus reached earlier by another front is therefore discarded. The
 * `classic` mode pins every stimulus for the whole march.
 *
 * Space discretisation: P1 Galerkin, lumped mass, one-point rule for the
 * per-cell constant Eikonal term. Each pseudo-time step is solved by
 * Newton's method with a halving line search; linear systems by BiCGSTAB
 * with diagonal preconditioning.
 */

#include <algorithm>
#include <numeric>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/IterativeLinearSolvers>

#include "eikcouple/assembly.hpp"
#include "eikcouple/mesh.hpp"

namespace eikcouple {

struct ConductivityModel {
  double sigma_f = 1.00e-4;  ///< fiber conductivity [m^2/s]
  double sigma_s = 0.44e-4;  ///< sheet conductivity [m^2/s]
  double sigma_n = 0.11e-4;  ///< normal conductivity [m^2/s]
  double chi_cm = 1.0;       ///< surface-to-volume ratio times membrane capacitance (divisor only)
  double c_f = 60.0;         ///< velocity parameter [s^-1/2]

  void validate() const {
    if (!(sigma_n > 0.0) || sigma_s < sigma_n || sigma_f < sigma_s)
      throw ValidationError("conductivities must satisfy sigma_f >= sigma_s >= sigma_n > 0");
    if (!(chi_cm > 0.0)) throw ValidationError("chi_m * C_m must be > 0");
    if (!(c_f > 0.0)) throw ValidationError("c_f must be > 0");
  }

  /// Planar front speed along a direction of conductivity sigma.
  double planar_speed(double sigma) const { return c_f * std::sqrt(sigma / chi_cm); }
};

/// S = (sigma_f f f^T + sigma_s s s^T + sigma_n n n^T) / (chi_m C_m), per cell.
inline TensorField build_conductivity(const ConductivityModel& model, const FiberField& fibers) {
  model.validate();
  TensorField out(fibers.size());
  const std::array<double, 3> sig{model.sigma_f, model.sigma_s, model.sigma_n};
  for (std::size_t c = 0; c < fibers.size(); ++c) {
    const auto& t = fibers[c];
    if (!fibers.is_orthonormal(t)) throw ValidationError("fiber triad of cell " + std::to_string(c) + " is not orthonormal", c);
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d d(t[k][0], t[k][1], t[k][2]);
      s += sig[k] * d * d.transpose();
    }
    out[c] = s / model.chi_cm;
  }
  return out;
}

enum class StimulusOrigin { pmj, ectopic, lead };

inline const char* to_string(StimulusOrigin o) {
  switch (o) {
    case StimulusOrigin::pmj: return "pmj";
    case StimulusOrigin::ectopic: return "ectopic";
    case StimulusOrigin::lead: return "lead";
  }
  return "?";
}

struct MuscleStimulus {
  Index vertex = 0;
  double time = 0.0;  ///< prescribed activation time [s]
  StimulusOrigin origin = StimulusOrigin::ectopic;
};

struct MuscleStimulusSet {
  std::vector<MuscleStimulus> stimuli;

  std::size_t size() const { return stimuli.size(); }
  bool empty() const { return stimuli.empty(); }

  /// Pointwise stimulus snapped to the nearest vertex.
  void add_point(const SimplicialMesh& mesh, const Point& p, double time, StimulusOrigin origin) {
    stimuli.push_back({mesh.nearest_vertex(p), time, origin});
  }

  /// Every vertex within `radius` of `center`; the nearest vertex when the
  /// sphere contains none. All share the same time. Returns the count added.
  std::size_t add_sphere(const SimplicialMesh& mesh, const Point& center, double radius, double time,
                         StimulusOrigin origin) {
    auto vs = mesh.vertices_within(center, radius);
    if (vs.empty()) vs.push_back(mesh.nearest_vertex(center));
    for (Index v : vs) stimuli.push_back({v, time, origin});
    return vs.size();
  }

  void validate(const SimplicialMesh& mesh) const {
    for (std::size_t i = 0; i < stimuli.size(); ++i) {
      if (stimuli[i].vertex >= mesh.num_vertices())
        throw ValidationError("stimulus " + std::to_string(i) + " references a vertex out of range", i);
      if (!std::isfinite(stimuli[i].time)) throw ValidationError("stimulus " + std::to_string(i) + " has a non-finite time", i);
    }
  }
};

/**
 * Active stimuli at the step ending at pseudo-time `t_next`:
 *   u0_i < t_next  and  u0_i < u_prev(x_i).
 *
 * `previously_active` (optional, one flag per stimulus) marks the stimuli
 * pinned during the previous step. Their vertex then holds exactly u0_i,
 * so for them the second test is taken as u0_i <= u_prev(x_i); otherwise a
 * pinned stimulus would be released every other step.
 *
 * Returns indices into `s0.stimuli`, ascending.
 */
inline std::vector<Index> active_stimuli(const MuscleStimulusSet& s0, const NodalField& u_prev, double t_next,
                                         std::span<const char> previously_active = {}) {
  std::vector<Index> out;
  for (Index i = 0; i < s0.stimuli.size(); ++i) {
    const auto& s = s0.stimuli[i];
    const bool sticky = i < previously_active.size() && previously_active[i];
    const double here = u_prev[s.vertex];
    if (s.time < t_next && (s.time < here || (sticky && s.time <= here))) out.push_back(i);
  }
  return out;
}

enum class PseudoTimeMode { novel, classic };

inline const char* to_string(PseudoTimeMode m) { return m == PseudoTimeMode::novel ? "novel" : "classic"; }

struct SolverOptions {
  double dt = 1e-3;                    ///< pseudo-time step [s]
  int bdf_order = 1;                   ///< 1 or 2 (first step always BDF1)
  double newton_tol = 1e-9;            ///< relative residual tolerance
  int newton_max_iter = 25;
  int divergence_window = 4;           ///< consecutive residual increases that abort a step
  double linear_tol = 1e-10;           ///< BiCGSTAB relative tolerance
  double steady_tol = 1e-6;            ///< max-norm step change declaring steady state [s]
  int max_pseudo_steps = 5000;
  double grad_regularization = 1e-20;  ///< epsilon in sqrt(grad u . S grad u + epsilon)
  double stabilization = 1.0;          ///< beta of stabilized_diffusion (used by the free solve())
  std::optional<double> u_init;        ///< initial field; default is an upper bound on activation
  PseudoTimeMode mode = PseudoTimeMode::novel;
  std::ostream* log = nullptr;         ///< per-step diagnostics when set

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("pseudo-time step must be > 0");
    if (bdf_order != 1 && bdf_order != 2) throw ValidationError("bdf_order must be 1 or 2");
    if (!(newton_tol > 0.0) || newton_max_iter < 1) throw ValidationError("Newton tolerance/iterations must be positive");
    if (divergence_window < 1) throw ValidationError("divergence window must be >= 1");
    if (!(linear_tol > 0.0)) throw ValidationError("linear tolerance must be > 0");
    if (!(steady_tol > 0.0) || max_pseudo_steps < 1) throw ValidationError("steady tolerance/max steps must be positive");
    if (!(grad_regularization > 0.0)) throw ValidationError("gradient regularization must be > 0");
    if (!(stabilization >= 0.0)) throw ValidationError("stabilization must be >= 0");
  }
};

namespace detail {

/// Runs fn(begin, end) over `threads` contiguous chunks of [0, n).
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n / 256, 1));
  if (t == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(t - 1);
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t k = 1; k < t; ++k) {
    const std::size_t b = std::min(n, k * chunk), e = std::min(n, (k + 1) * chunk);
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

}  // namespace detail

/// Diffusion tensor actually assembled: every eigenvalue lambda of a cell's
/// tensor is raised to at least beta * c_f * sqrt(lambda) * h / 2, with h the
/// cell extent along that eigenvector. On meshes that resolve the diffusive
/// layer (cell Peclet number below one) this is the identity; on coarser
/// meshes it keeps discrete minima from sinking below their neighbours.
/// beta = 0 disables it. The Eikonal term always uses the physical tensor.
inline TensorField stabilized_diffusion(const SimplicialMesh& mesh, const TensorField& sigma, double c_f, double beta) {
  TensorField out = sigma;
  if (!(beta > 0.0) || !(c_f > 0.0)) return out;
  const int d = mesh.dim();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma[c].topLeftCorner(d, d));
    Eigen::VectorXd lam = eig.eigenvalues();
    const Eigen::MatrixXd vec = eig.eigenvectors();
    bool changed = false;
    for (int k = 0; k < d; ++k) {
      double lo = kInfinity, hi = -kInfinity;
      for (Index v : mesh.cell(c)) {
        double x = 0.0;
        for (int a = 0; a < d; ++a) x += mesh.vertex(v)[static_cast<std::size_t>(a)] * vec(a, k);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      const double floor = beta * c_f * std::sqrt(std::max(lam[k], 0.0)) * (hi - lo) / 2.0;
      if (lam[k] < floor) {
        lam[k] = floor;
        changed = true;
      }
    }
    if (changed) {
      out[c].setZero();
      out[c].topLeftCorner(d, d) = vec * lam.asDiagonal() * vec.transpose();
    }
  }
  return out;
}

/// Prescribed values on a subset of vertices.
struct DirichletSet {
  std::vector<Index> vertices;
  std::vector<double> values;
};

/// Discrete residual and Jacobian of one BDF pseudo-time step,
///   R(u) = M (alpha u - u_bdf) / dt + E(u) + K u - M 1,
/// with M the lumped mass, K the stiffness of the (stabilized) diffusion
/// tensor and E_i the integral of
/// c_f sqrt(grad u . S grad u + eps) phi_i. `dt = inf` gives the steady
/// residual. The mesh must outlive the operator.
class EikonalDiffusionOperator {
 public:
  EikonalDiffusionOperator(const SimplicialMesh& mesh, TensorField sigma, double c_f, double grad_regularization = 1e-20,
                           double stabilization = 1.0)
      : mesh_(&mesh), sigma_(std::move(sigma)), c_f_(c_f), eps_(grad_regularization) {
    if (!(c_f_ >= 0.0)) throw ValidationError("c_f must be >= 0");
    if (!(stabilization >= 0.0)) throw ValidationError("stabilization must be >= 0");
    if (sigma_.size() != mesh.num_cells()) throw ValidationError("one conductivity tensor per cell is required");
    for (std::size_t c = 0; c < sigma_.size(); ++c) detail::check_tensor(sigma_[c], mesh.dim(), c);
    auto op = assemble_operator(mesh, stabilized_diffusion(mesh, sigma_, c_f_, stabilization));
    stiffness_ = std::move(op.matrix);
    ws_ = std::move(op.workspace);
    diag_slot_.resize(mesh.num_vertices());
    for (std::size_t k = 0; k < ws_.nonzeros(); ++k)
      if (ws_.row_of(k) == ws_.col_of(k)) diag_slot_[ws_.row_of(k)] = k;
  }

  const SimplicialMesh& mesh() const { return *mesh_; }
  const TensorField& conductivity() const { return sigma_; }
  double c_f() const { return c_f_; }
  const std::vector<double>& lumped_mass() const { return ws_.lumped_mass(); }
  const SparseMatrix& stiffness() const { return stiffness_; }
  const AssemblyWorkspace& workspace() const { return ws_; }

  /// Smallest conductivity eigenvalue over all cells (restricted to the mesh dimension).
  double min_conductivity() const {
    double lo = kInfinity;
    const int d = mesh_->dim();
    for (const auto& s : sigma_) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.topLeftCorner(d, d), Eigen::EigenvaluesOnly);
      lo = std::min(lo, eig.eigenvalues().minCoeff());
    }
    return lo;
  }

  /// Worker threads for the per-cell loops. Results do not depend on it.
  void set_threads(int threads) { threads_ = std::max(threads, 1); }
  int threads() const { return threads_; }

  Vector residual(const Vector& u, const Vector& u_bdf, double alpha, double dt) const {
    Vector r = stiffness_ * u;
    const auto& m = ws_.lumped_mass();
    const double share = 1.0 / static_cast<double>(mesh_->vertices_per_cell());
    std::vector<double> cell_term(mesh_->num_cells());
    detail::parallel_chunks(cell_term.size(), threads_, [&](std::size_t b, std::size_t e) {
      for (std::size_t c = b; c < e; ++c) {
        const Eigen::Vector3d grad = cell_gradient(c, u);
        cell_term[c] = c_f_ * std::sqrt(grad.dot(sigma_[c] * grad) + eps_) * mesh_->cell_measure(c) * share;
      }
    });
    for (std::size_t c = 0; c < mesh_->num_cells(); ++c)
      for (Index v : mesh_->cell(c)) r[static_cast<Eigen::Index>(v)] += cell_term[c];
    const bool steady = std::isinf(dt);
    for (Index v = 0; v < mesh_->num_vertices(); ++v) {
      const auto i = static_cast<Eigen::Index>(v);
      r[i] -= m[v];
      if (!steady) r[i] += m[v] * (alpha * u[i] - u_bdf[i]) / dt;
    }
    return r;
  }

  SparseMatrix jacobian(const Vector& u, double alpha, double dt) const {
    SparseMatrix j = stiffness_;
    double* val = j.valuePtr();
    const auto& m = ws_.lumped_mass();
    const std::size_t nvc = mesh_->vertices_per_cell();
    const double share = 1.0 / static_cast<double>(nvc);
    // d/du_b of the cell term, identical for every test vertex a of the cell.
    std::vector<double> cell_d(mesh_->num_cells() * nvc);
    detail::parallel_chunks(mesh_->num_cells(), threads_, [&](std::size_t b0, std::size_t e0) {
      for (std::size_t c = b0; c < e0; ++c) {
        const CellGradients& g = mesh_->cell_gradients(c);
        const Eigen::Vector3d grad = cell_gradient(c, u);
        const Eigen::Vector3d sgrad = sigma_[c] * grad;
        const double w = c_f_ * mesh_->cell_measure(c) * share / std::sqrt(grad.dot(sgrad) + eps_);
        for (std::size_t b = 0; b < nvc; ++b) cell_d[c * nvc + b] = w * sgrad.dot(g.col(static_cast<Eigen::Index>(b)));
      }
    });
    for (std::size_t c = 0; c < mesh_->num_cells(); ++c)
      for (std::size_t b = 0; b < nvc; ++b)
        for (std::size_t a = 0; a < nvc; ++a) val[ws_.slot(c, a, b)] += cell_d[c * nvc + b];
    if (!std::isinf(dt))
      for (Index v = 0; v < mesh_->num_vertices(); ++v) val[diag_slot_[v]] += m[v] * alpha / dt;
    return j;
  }

  /// Zeroes Dirichlet rows and columns and puts 1 on their diagonal.
  void eliminate(SparseMatrix& j, const std::vector<char>& fixed) const {
    double* val = j.valuePtr();
    for (std::size_t k = 0; k < ws_.nonzeros(); ++k) {
      const Index r = ws_.row_of(k), c = ws_.col_of(k);
      if (fixed[r] || fixed[c]) val[k] = (r == c) ? 1.0 : 0.0;
    }
  }

 private:
  Eigen::Vector3d cell_gradient(std::size_t c, const Vector& u) const {
    const CellGradients& g = mesh_->cell_gradients(c);
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    auto vs = mesh_->cell(c);
    for (std::size_t k = 0; k < vs.size(); ++k) grad += u[static_cast<Eigen::Index>(vs[k])] * g.col(static_cast<Eigen::Index>(k));
    return grad;
  }

  const SimplicialMesh* mesh_;
  TensorField sigma_;
  double c_f_;
  double eps_;
  SparseMatrix stiffness_;
  AssemblyWorkspace ws_;
  std::vector<std::size_t> diag_slot_;
  int threads_ = 1;
};

struct StepResult {
  NodalField u;
  int newton_iterations = 0;
  double residual_norm = 0.0;  ///< relative, over free vertices
  bool converged = false;
};

/**
 * One implicit pseudo-time step. `u_n` is the last level; `u_nm1` the one
 * before it (used only when bdf_order == 2, otherwise may be null). The
 * step is BDF1 ((u - u_n)/dt) or BDF2 ((3/2 u - 2 u_n + 1/2 u_nm1)/dt).
 * Dirichlet values are substituted before Newton starts and never change,
 * so they hold exactly on return.
 */
inline StepResult pseudo_time_step(const EikonalDiffusionOperator& op, const NodalField& u_n, const NodalField* u_nm1,
                                   const DirichletSet& dirichlet, const SolverOptions& opt) {
  const auto n = static_cast<Eigen::Index>(u_n.size());
  const bool bdf2 = opt.bdf_order == 2 && u_nm1 != nullptr;
  const double alpha = bdf2 ? 1.5 : 1.0;
  Vector u_bdf(n);
  for (Eigen::Index i = 0; i < n; ++i) u_bdf[i] = bdf2 ? 2.0 * u_n[i] - 0.5 * (*u_nm1)[i] : u_n[i];

  std::vector<char> fixed(u_n.size(), 0);
  Vector u = Eigen::Map<const Vector>(u_n.data(), n);
  for (std::size_t k = 0; k < dirichlet.vertices.size(); ++k) {
    fixed[dirichlet.vertices[k]] = 1;
    u[static_cast<Eigen::Index>(dirichlet.vertices[k])] = dirichlet.values[k];
  }
  const auto& m = op.lumped_mass();
  auto free_norm = [&](const Vector& r) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!fixed[static_cast<std::size_t>(i)]) s += r[i] * r[i];
    return std::sqrt(s);
  };
  // scale of the forcing terms: M u_bdf / dt and M 1
  double scale = 0.0;
  {
    Vector f(n);
    for (Eigen::Index i = 0; i < n; ++i) f[i] = m[static_cast<std::size_t>(i)] * (std::abs(u_bdf[i]) / opt.dt + 1.0);
    scale = std::max(free_norm(f), 1e-300);
  }

  StepResult res;
  Vector r = op.residual(u, u_bdf, alpha, opt.dt);
  double norm = free_norm(r) / scale;
  int growth = 0;
  Eigen::BiCGSTAB<SparseMatrix> krylov;
  krylov.setTolerance(opt.linear_tol);
  for (int it = 0; it < opt.newton_max_iter && !(norm <= opt.newton_tol); ++it) {
    SparseMatrix jac = op.jacobian(u, alpha, opt.dt);
    op.eliminate(jac, fixed);
    Vector rhs = -r;
    for (Eigen::Index i = 0; i < n; ++i)
      if (fixed[static_cast<std::size_t>(i)]) rhs[i] = 0.0;
    krylov.compute(jac);
    const Vector delta = krylov.solve(rhs);
    if (krylov.info() != Eigen::Success || !delta.allFinite())
      throw SolverError("linear solver breakdown in Newton iteration " + std::to_string(it + 1) +
                        " (BiCGSTAB error " + std::to_string(krylov.error()) + ")");

    double lambda = 1.0;
    Vector trial = u + delta;
    Vector r_trial = op.residual(trial, u_bdf, alpha, opt.dt);
    double trial_norm = free_norm(r_trial) / scale;
    for (int halvings = 0; !(trial_norm < norm) && halvings < 12; ++halvings) {
      lambda *= 0.5;
      trial = u + lambda * delta;
      r_trial = op.residual(trial, u_bdf, alpha, opt.dt);
      trial_norm = free_norm(r_trial) / scale;
    }
    if (!std::isfinite(trial_norm)) throw SolverError("Newton produced a non-finite residual");
    growth = trial_norm > norm ? growth + 1 : 0;
    if (growth >= opt.divergence_window)
      throw SolverError("Newton diverged: residual grew for " + std::to_string(growth) + " consecutive iterations");
    u = std::move(trial);
    r = std::move(r_trial);
    norm = trial_norm;
    res.newton_iterations = it + 1;
  }
  res.converged = norm <= opt.newton_tol;
  res.residual_norm = norm;
  res.u.assign(u.data(), u.data() + n);
  return res;
}

struct SolveResult {
  ActivationField u;
  std::vector<Index> final_active;  ///< indices into the stimulus set, ascending
  int steps = 0;
  double pseudo_time = 0.0;         ///< clock at the last step [s]
  int unconverged_newton_steps = 0;
};

/// Reusable solver for one mesh and conductivity (the operator is built once).
class EikonalDiffusionSolver {
 public:
  EikonalDiffusionSolver(const SimplicialMesh& mesh, TensorField sigma, double c_f, double grad_regularization = 1e-20,
                         double stabilization = 1.0)
      : op_(mesh, std::move(sigma), c_f, grad_regularization, stabilization) {}

  const EikonalDiffusionOperator& op() const { return op_; }
  void set_threads(int threads) { op_.set_threads(threads); }

  /// Default initial field: latest stimulus plus the time a front at the
  /// slowest conduction speed needs to cross the bounding box.
  double default_initial_value(const MuscleStimulusSet& s0) const {
    double t_max = -kInfinity;
    for (const auto& s : s0.stimuli) t_max = std::max(t_max, s.time);
    const double slowest = op_.c_f() * std::sqrt(op_.min_conductivity());
    return slowest > 0.0 ? t_max + op_.mesh().bounding_diameter() / slowest : t_max;
  }

  SolveResult solve(const MuscleStimulusSet& s0, const SolverOptions& opt) const {
    opt.validate();
    const auto& mesh = op_.mesh();
    s0.validate(mesh);
    if (s0.empty()) throw ValidationError("at least one muscle stimulus is required");

    // One stimulus per vertex: the earliest (first on ties).
    std::vector<Index> owner(mesh.num_vertices(), kNoStimulus);
    for (Index i = 0; i < s0.size(); ++i) {
      Index& o = owner[s0.stimuli[i].vertex];
      if (o == kNoStimulus || s0.stimuli[i].time < s0.stimuli[o].time) o = i;
    }
    std::vector<Index> kept;
    for (Index i = 0; i < s0.size(); ++i)
      if (owner[s0.stimuli[i].vertex] == i) kept.push_back(i);
    MuscleStimulusSet eff;
    double t_min = kInfinity, t_max = -kInfinity;
    for (Index i : kept) {
      eff.stimuli.push_back(s0.stimuli[i]);
      t_min = std::min(t_min, s0.stimuli[i].time);
      t_max = std::max(t_max, s0.stimuli[i].time);
    }

    const double u_init = opt.u_init.value_or(default_initial_value(s0));
    NodalField u(mesh.num_vertices(), u_init);
    NodalField u_old;
    std::vector<char> was_active(eff.size(), 0);
    bool ever_active = false;
    const bool novel = opt.mode == PseudoTimeMode::novel;

    SolveResult out;
    for (int step = 0; step < opt.max_pseudo_steps; ++step) {
      const double t_next = t_min + (step + 1) * opt.dt;
      std::vector<Index> active;
      if (novel) {
        active = active_stimuli(eff, u, t_next, was_active);
      } else {
        active.resize(eff.size());
        std::iota(active.begin(), active.end(), Index{0});
      }
      if (!active.empty()) ever_active = true;
      if (novel && !ever_active && t_next > t_max)
        throw SolverError("no stimulus became active: every prescribed time is later than the initial field");

      std::vector<char> now_active(eff.size(), 0);
      DirichletSet dir;
      for (Index a : active) {
        now_active[a] = 1;
        dir.vertices.push_back(eff.stimuli[a].vertex);
        dir.values.push_back(eff.stimuli[a].time);
      }
      StepResult sr;
      try {
        sr = pseudo_time_step(op_, u, u_old.empty() ? nullptr : &u_old, dir, opt);
      } catch (const SolverError& e) {
        throw SolverError("pseudo-time step " + std::to_string(step + 1) + ": " + e.what());
      }
      if (!sr.converged) ++out.unconverged_newton_steps;

      double change = 0.0;
      for (std::size_t v = 0; v < u.size(); ++v) change = std::max(change, std::abs(sr.u[v] - u[v]));
      const bool same_set = now_active == was_active;
      if (opt.log)
        *opt.log << "pseudo-step " << step + 1 << " t=" << t_next << " active=" << active.size() << "/" << eff.size()
                 << " newton=" << sr.newton_iterations << " residual=" << sr.residual_norm << " change=" << change
                 << (sr.converged ? "" : " (newton not converged)") << '\n';
      u_old = std::move(u);
      u = std::move(sr.u);
      was_active = std::move(now_active);
      out.steps = step + 1;
      out.pseudo_time = t_next;
      if (same_set && change <= opt.steady_tol) {
        out.u = std::move(u);
        for (Index a = 0; a < eff.size(); ++a)
          if (was_active[a]) out.final_active.push_back(kept[a]);
        return out;
      }
    }
    throw SolverError("pseudo-time march did not reach steady state within " + std::to_string(opt.max_pseudo_steps) +
                      " steps");
  }

 private:
  static constexpr Index kNoStimulus = static_cast<Index>(-1);
  EikonalDiffusionOperator op_;
};

inline SolveResult solve(const SimplicialMesh& mesh, const TensorField& sigma, double c_f, const MuscleStimulusSet& s0,
                         const SolverOptions& opt) {
  return EikonalDiffusionSolver(mesh, sigma, c_f, opt.grad_regularization, opt.stabilization).solve(s0, opt);
}

}  // namespace eikcouple
