#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "eikcouple/eikonal_diffusion.hpp"
#include "oracles.hpp"

using namespace eikcouple;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kSigmaF = 1.00e-4;
constexpr double kCf = 60.0;

TensorField table_conductivity(const SimplicialMesh& mesh, std::array<int, 3> axes = {0, 1, 2}) {
  return build_conductivity(ConductivityModel{}, FiberField::axis_aligned(mesh.dim(), mesh.num_cells(), axes));
}

// Two stimuli at t = 0 flanking a later one at the centre of a 1 cm line.
struct ThreeStimuli {
  SimplicialMesh mesh;
  MuscleStimulusSet s0;
  Index centre;
};

ThreeStimuli three_stimuli(int divisions, double late_time = 0.02) {
  auto mesh = build_structured_slab(1, {0.01}, {divisions});
  MuscleStimulusSet s;
  s.add_point(mesh, {0.002, 0, 0}, 0.0, StimulusOrigin::ectopic);
  s.add_point(mesh, {0.008, 0, 0}, 0.0, StimulusOrigin::ectopic);
  s.add_point(mesh, {0.005, 0, 0}, late_time, StimulusOrigin::lead);
  const Index c = s.stimuli.back().vertex;
  return {std::move(mesh), std::move(s), c};
}

double max_error_vs_two_fronts(const ThreeStimuli& p, const NodalField& u) {
  const oracle::TwoFront1D exact(0.01, 0.002, 0.0, 0.008, 0.0, kSigmaF, kCf);
  double err = 0.0;
  for (Index v = 0; v < p.mesh.num_vertices(); ++v) err = std::max(err, std::abs(u[v] - exact(p.mesh.vertex(v)[0])));
  return err;
}

double fitted_speed(const SimplicialMesh& mesh, const NodalField& u, int axis, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const double x = mesh.vertex(v)[static_cast<std::size_t>(axis)];
    if (x < lo || x > hi) continue;
    sx += x;
    sy += u[v];
    sxx += x * x;
    sxy += x * u[v];
    ++n;
  }
  return (n * sxx - sx * sx) / (n * sxy - sx * sy);
}

MuscleStimulusSet face_stimulus(const SimplicialMesh& mesh, int axis, double t = 0.0) {
  MuscleStimulusSet s;
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.vertex(v)[static_cast<std::size_t>(axis)] == 0.0) s.stimuli.push_back({v, t, StimulusOrigin::ectopic});
  return s;
}

double max_abs_diff(const NodalField& a, const NodalField& b, double shift = 0.0) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i] - shift));
  return d;
}

}  // namespace

TEST_CASE("conductivity tensors", "[eikonal][conductivity]") {
  SECTION("isotropic limit ignores fibers") {
    ConductivityModel m;
    m.sigma_f = m.sigma_s = m.sigma_n = 3e-5;
    const double a = 0.7;
    FiberField::Triad t{{{std::cos(a), std::sin(a), 0}, {-std::sin(a), std::cos(a), 0}, {0, 0, 1}}};
    const auto s = build_conductivity(m, FiberField(3, {t}));
    CHECK((s[0] - 3e-5 * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-20);
  }
  SECTION("axis-aligned fibers give the diagonal of default conductivities") {
    const auto s = build_conductivity(ConductivityModel{}, FiberField::axis_aligned(3, 1));
    CHECK(s[0](0, 0) == 1.00e-4);
    CHECK(s[0](1, 1) == 0.44e-4);
    CHECK(s[0](2, 2) == 0.11e-4);
    CHECK(s[0](0, 1) == 0.0);
  }
  SECTION("rotated triad is recovered by an eigensolve") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::Matrix3d q = Eigen::HouseholderQR<Eigen::Matrix3d>(Eigen::Matrix3d::NullaryExpr([&] { return g(rng); }))
                              .householderQ();
      FiberField::Triad t;
      for (int k = 0; k < 3; ++k) t[k] = {q(0, k), q(1, k), q(2, k)};
      const auto s = build_conductivity(ConductivityModel{}, FiberField(3, {t}))[0];
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(s);
      CHECK_THAT(eig.eigenvalues()[2], WithinRel(1.00e-4, 1e-12));
      CHECK_THAT(eig.eigenvalues()[1], WithinRel(0.44e-4, 1e-12));
      CHECK_THAT(eig.eigenvalues()[0], WithinRel(0.11e-4, 1e-12));
      CHECK_THAT(std::abs(eig.eigenvectors().col(2).dot(q.col(0))), WithinAbs(1.0, 1e-10));
      CHECK_THAT(std::abs(eig.eigenvectors().col(0).dot(q.col(2))), WithinAbs(1.0, 1e-10));
    }
  }
  SECTION("chi_m C_m divides the tensor") {
    ConductivityModel m;
    m.chi_cm = 2.0;
    CHECK(build_conductivity(m, FiberField::axis_aligned(3, 1))[0](0, 0) == 0.5e-4);
    CHECK_THAT(m.planar_speed(m.sigma_f), WithinRel(60.0 * std::sqrt(0.5e-4), 1e-15));
  }
  SECTION("invalid parameters") {
    ConductivityModel m;
    m.sigma_s = 2e-4;
    CHECK_THROWS_AS(build_conductivity(m, FiberField::axis_aligned(3, 1)), ValidationError);
    m = {};
    m.c_f = 0.0;
    CHECK_THROWS_AS(m.validate(), ValidationError);
  }
}

TEST_CASE("active stimulus selection", "[eikonal][active]") {
  MuscleStimulusSet s;
  s.stimuli.push_back({0, 5e-3, StimulusOrigin::ectopic});
  CHECK(active_stimuli(s, {3e-3}, 10e-3).empty());
  CHECK(active_stimuli(s, {100e-3}, 4e-3).empty());
  CHECK(active_stimuli(s, {100e-3}, 10e-3) == std::vector<Index>{0});
  // Strict inequality unless the stimulus was pinned in the last step.
  CHECK(active_stimuli(s, {5e-3}, 10e-3).empty());
  const std::vector<char> pinned{1};
  CHECK(active_stimuli(s, {5e-3}, 10e-3, pinned) == std::vector<Index>{0});
  CHECK(active_stimuli(s, {4e-3}, 10e-3, pinned).empty());

  MuscleStimulusSet many;
  many.stimuli = {{0, 1e-3, StimulusOrigin::pmj}, {1, 9e-3, StimulusOrigin::pmj}, {2, 2e-3, StimulusOrigin::lead}};
  CHECK(active_stimuli(many, {1.0, 1.0, 1e-3}, 5e-3) == std::vector<Index>{0});
}

TEST_CASE("stimulus sets", "[eikonal]") {
  auto mesh = build_structured_slab(2, {0.01, 0.01}, {10, 10});
  MuscleStimulusSet s;
  CHECK(s.add_sphere(mesh, {0.005, 0.005, 0}, 1.01e-3, -0.03, StimulusOrigin::ectopic) == 5);
  CHECK(s.add_sphere(mesh, {0.0052, 0.0049, 0}, 1e-5, 0.0, StimulusOrigin::lead) == 1);
  CHECK(s.stimuli.back().vertex == mesh.nearest_vertex({0.005, 0.005, 0}));
  CHECK_NOTHROW(s.validate(mesh));
  s.stimuli.push_back({mesh.num_vertices(), 0.0, StimulusOrigin::pmj});
  CHECK_THROWS_AS(s.validate(mesh), ValidationError);
  s.stimuli.back() = {0, NAN, StimulusOrigin::pmj};
  CHECK_THROWS_AS(s.validate(mesh), ValidationError);
}

TEST_CASE("fully constrained step returns the prescribed values", "[eikonal][step]") {
  auto mesh = build_structured_slab(2, {0.004, 0.004}, {4, 4});
  EikonalDiffusionOperator op(mesh, table_conductivity(mesh), kCf);
  DirichletSet d;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(-0.01, 0.05);
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    d.vertices.push_back(v);
    d.values.push_back(t(rng));
  }
  const auto r = pseudo_time_step(op, NodalField(mesh.num_vertices(), 0.1), nullptr, d, SolverOptions{});
  CHECK(r.converged);
  CHECK(r.u == d.values);
}

TEST_CASE("Dirichlet vertices are exact after every step", "[eikonal][step][property]") {
  auto mesh = build_structured_slab(3, {0.004, 0.003, 0.002}, {4, 3, 2});
  EikonalDiffusionOperator op(mesh, table_conductivity(mesh), kCf);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<Index> vert(0, mesh.num_vertices() - 1);
  std::uniform_real_distribution<double> t(0.0, 0.02);
  NodalField u(mesh.num_vertices(), 0.05), u_old;
  SolverOptions opt;
  opt.bdf_order = 2;
  for (int step = 0; step < 6; ++step) {
    DirichletSet d;
    for (int k = 0; k < 3; ++k) {
      d.vertices.push_back(vert(rng));
      d.values.push_back(t(rng));
    }
    d.vertices.push_back(d.vertices.front() == 0 ? 1 : 0);
    d.values.push_back(1.0 / 3.0 * 1e-2);
    auto r = pseudo_time_step(op, u, u_old.empty() ? nullptr : &u_old, d, opt);
    // A vertex listed twice keeps its last value.
    std::map<Index, double> last;
    for (std::size_t k = 0; k < d.vertices.size(); ++k) last[d.vertices[k]] = d.values[k];
    for (const auto& [v, x] : last) CHECK(r.u[v] == x);
    u_old = std::move(u);
    u = std::move(r.u);
  }
}

TEST_CASE("Jacobian matches central finite differences", "[eikonal][jacobian]") {
  auto mesh = build_structured_slab(3, {0.003, 0.002, 0.002}, {3, 2, 2});
  for (double beta : {0.0, 1.0}) {
    EikonalDiffusionOperator op(mesh, table_conductivity(mesh, {1, 2, 0}), kCf, 1e-20, beta);
    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> t(0.0, 0.02);
    for (int state = 0; state < 20; ++state) {
      Vector u(n), u_bdf(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = t(rng);
        u_bdf[i] = t(rng);
      }
      const double dt = state % 2 ? 1e-3 : kInfinity;
      const Eigen::MatrixXd j = Eigen::MatrixXd(op.jacobian(u, 1.5, dt));
      Eigen::MatrixXd fd(n, n);
      const double h = 1e-7;
      for (Eigen::Index c = 0; c < n; ++c) {
        Vector up = u, um = u;
        up[c] += h;
        um[c] -= h;
        fd.col(c) = (op.residual(up, u_bdf, 1.5, dt) - op.residual(um, u_bdf, 1.5, dt)) / (2 * h);
      }
      const double rel = (j - fd).norm() / j.norm();
      INFO("beta " << beta << " state " << state << " relative error " << rel);
      CHECK(rel <= 1e-5);
    }
  }
}

TEST_CASE("without the Eikonal term the step is a linear FEM solve", "[eikonal][oracle]") {
  SECTION("1D: nodally exact parabola") {
    // -s u'' = 1, u(0) = 0, u'(L) = 0  ->  u = (L x - x^2 / 2) / s
    const double L = 0.01, s = 1e-4;
    auto mesh = build_structured_slab(1, {L}, {16});
    EikonalDiffusionOperator op(mesh, TensorField(mesh.num_cells(), s * Eigen::Matrix3d::Identity()), 0.0);
    SolverOptions opt;
    opt.dt = kInfinity;
    const auto r = pseudo_time_step(op, NodalField(mesh.num_vertices(), 0.0), nullptr, {{0}, {0.0}}, opt);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const double x = mesh.vertex(v)[0];
      CHECK_THAT(r.u[v], WithinRel((L * x - x * x / 2) / s, 1e-8) || WithinAbs(0.0, 1e-14));
    }
  }
  SECTION("2D: independently assembled system") {
    auto mesh = build_structured_slab(2, {0.004, 0.003}, {5, 4});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(0.5, 1.5);
    TensorField sigma;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      m(0, 0) = 1e-4 * d(rng);
      m(1, 1) = 1e-4 * d(rng);
      m(0, 1) = m(1, 0) = 2e-5 * (d(rng) - 1.0);
      sigma.push_back(m);
    }
    EikonalDiffusionOperator op(mesh, sigma, 0.0);
    SolverOptions opt;
    opt.dt = kInfinity;
    const Index pinned = 7;
    const auto r = pseudo_time_step(op, NodalField(mesh.num_vertices(), 0.0), nullptr, {{pinned}, {0.002}}, opt);

    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto vs = mesh.cell(c);
      Eigen::Matrix3d a;
      for (int i = 0; i < 3; ++i) a.col(i) << 1.0, mesh.vertex(vs[i])[0], mesh.vertex(vs[i])[1];
      const Eigen::Matrix3d inv = a.inverse();
      const double area = std::abs(a.determinant()) / 2;
      for (int i = 0; i < 3; ++i) {
        f[static_cast<Eigen::Index>(vs[i])] += area / 3;
        for (int j = 0; j < 3; ++j) {
          const Eigen::Vector2d gi = inv.block<1, 2>(i, 1).transpose(), gj = inv.block<1, 2>(j, 1).transpose();
          k(static_cast<Eigen::Index>(vs[i]), static_cast<Eigen::Index>(vs[j])) +=
              area * gi.dot(sigma[c].topLeftCorner<2, 2>() * gj);
        }
      }
    }
    const auto p = static_cast<Eigen::Index>(pinned);
    f -= k.col(p) * 0.002;
    k.row(p).setZero();
    k.col(p).setZero();
    k(p, p) = 1.0;
    f[p] = 0.002;
    const Eigen::VectorXd ref = k.partialPivLu().solve(f);
    for (Eigen::Index i = 0; i < n; ++i) CHECK_THAT(r.u[static_cast<std::size_t>(i)], WithinRel(ref[i], 1e-7));
  }
}

TEST_CASE("two early stimuli hide a later central one", "[eikonal][three-stimuli]") {
  const auto p = three_stimuli(40);
  const auto sigma = table_conductivity(p.mesh);
  SolverOptions opt;

  opt.mode = PseudoTimeMode::novel;
  const auto novel = solve(p.mesh, sigma, kCf, p.s0, opt);
  CHECK(novel.u[p.centre] < 0.02);
  CHECK(novel.final_active == std::vector<Index>{0, 1});
  const oracle::TwoFront1D exact(0.01, 0.002, 0.0, 0.008, 0.0, kSigmaF, kCf);
  CHECK_THAT(novel.u[p.centre], WithinAbs(exact(0.005), 2.5e-4 / exact.speed() + opt.steady_tol));
  CHECK(max_error_vs_two_fronts(p, novel.u) <= 2 * 2.5e-4 / exact.speed());

  opt.mode = PseudoTimeMode::classic;
  const auto classic = solve(p.mesh, sigma, kCf, p.s0, opt);
  CHECK(classic.u[p.centre] == 0.02);
  CHECK(classic.final_active == std::vector<Index>{0, 1, 2});
}

TEST_CASE("error against the two-front solution decreases under refinement", "[eikonal][refinement]") {
  std::vector<double> errors;
  for (int n : {40, 80, 160}) {
    const auto p = three_stimuli(n);
    errors.push_back(max_error_vs_two_fronts(p, solve(p.mesh, table_conductivity(p.mesh), kCf, p.s0, {}).u));
  }
  INFO("errors " << errors[0] << ' ' << errors[1] << ' ' << errors[2]);
  CHECK(errors[1] < errors[0]);
  CHECK(errors[2] < errors[1]);
}

TEST_CASE("interior slope of a single front is 1/(c_f sqrt(sigma)) at every level", "[eikonal][refinement]") {
  // A constant gradient solves the discrete interior equations exactly, so
  // the fitted speed is limited by the steady-state tolerance only.
  for (int n : {40, 80, 160}) {
    auto mesh = build_structured_slab(1, {0.01}, {n});
    const auto r = solve(mesh, table_conductivity(mesh), kCf, face_stimulus(mesh, 0), {});
    INFO("divisions " << n);
    CHECK_THAT(fitted_speed(mesh, r.u, 0, 0.0025, 0.0075), WithinRel(0.6, 1e-5));
  }
}

TEST_CASE("novel and classic agree for a single stimulus", "[eikonal][property]") {
  auto mesh = build_structured_slab(2, {0.008, 0.006}, {16, 12});
  const auto sigma = table_conductivity(mesh);
  for (const Point& at : {Point{0, 0, 0}, Point{0.004, 0.003, 0}, Point{0.008, 0.001, 0}}) {
    MuscleStimulusSet s;
    s.add_point(mesh, at, 0.004, StimulusOrigin::ectopic);
    SolverOptions opt;
    const auto a = solve(mesh, sigma, kCf, s, opt);
    opt.mode = PseudoTimeMode::classic;
    const auto b = solve(mesh, sigma, kCf, s, opt);
    CHECK(max_abs_diff(a.u, b.u) <= 2 * opt.steady_tol);
  }
}

TEST_CASE("shifting every stimulus time shifts the solution", "[eikonal][property]") {
  auto mesh = build_structured_slab(2, {0.008, 0.006}, {16, 12});
  const auto sigma = table_conductivity(mesh);
  MuscleStimulusSet s;
  s.add_point(mesh, {0.001, 0.001, 0}, 0.0, StimulusOrigin::ectopic);
  s.add_point(mesh, {0.007, 0.005, 0}, 0.003, StimulusOrigin::pmj);
  s.add_point(mesh, {0.004, 0.003, 0}, 0.02, StimulusOrigin::lead);
  SolverOptions opt;
  const auto base = solve(mesh, sigma, kCf, s, opt);
  for (double shift : {-0.03, 0.05}) {
    auto moved = s;
    for (auto& x : moved.stimuli) x.time += shift;
    const auto r = solve(mesh, sigma, kCf, moved, opt);
    CHECK(r.final_active == base.final_active);
    CHECK(max_abs_diff(r.u, base.u, shift) <= 2 * opt.steady_tol);
  }
}

TEST_CASE("final active set is exact and excluded stimuli were beaten", "[eikonal][property]") {
  auto mesh = build_structured_slab(2, {0.008, 0.006}, {16, 12});
  const auto sigma = table_conductivity(mesh, {1, 0, 2});
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Index> vert(0, mesh.num_vertices() - 1);
  std::uniform_real_distribution<double> t(0.0, 0.03);
  for (int trial = 0; trial < 4; ++trial) {
    MuscleStimulusSet s;
    for (int k = 0; k < 6; ++k) s.stimuli.push_back({vert(rng), t(rng), StimulusOrigin::pmj});
    SolverOptions opt;
    const auto r = solve(mesh, sigma, kCf, s, opt);
    std::vector<char> active(s.size(), 0);
    for (Index a : r.final_active) active[a] = 1;
    for (Index i = 0; i < s.size(); ++i) {
      const auto& st = s.stimuli[i];
      INFO("trial " << trial << " stimulus " << i);
      if (active[i])
        CHECK(r.u[st.vertex] == st.time);
      else
        CHECK(r.u[st.vertex] <= st.time + opt.steady_tol);
    }
  }
}

TEST_CASE("duplicate stimuli on one vertex keep the earliest", "[eikonal]") {
  auto mesh = build_structured_slab(1, {0.005}, {20});
  MuscleStimulusSet s;
  s.stimuli = {{4, 0.002, StimulusOrigin::pmj}, {4, 0.001, StimulusOrigin::ectopic}};
  const auto r = solve(mesh, table_conductivity(mesh), kCf, s, {});
  CHECK(r.u[4] == 0.001);
  CHECK(r.final_active == std::vector<Index>{1});
}

TEST_CASE("BDF2 reaches the same steady state", "[eikonal][bdf]") {
  const auto p = three_stimuli(40);
  const auto sigma = table_conductivity(p.mesh);
  SolverOptions opt;
  const auto one = solve(p.mesh, sigma, kCf, p.s0, opt);
  opt.bdf_order = 2;
  const auto two = solve(p.mesh, sigma, kCf, p.s0, opt);
  CHECK(two.final_active == one.final_active);
  CHECK(max_abs_diff(one.u, two.u) <= 1e-5);
}

TEST_CASE("solver errors", "[eikonal][errors]") {
  auto mesh = build_structured_slab(1, {0.005}, {10});
  const auto sigma = table_conductivity(mesh);
  CHECK_THROWS_AS(solve(mesh, sigma, kCf, {}, {}), ValidationError);
  MuscleStimulusSet s;
  s.stimuli = {{0, 0.0, StimulusOrigin::ectopic}};
  SolverOptions opt;
  opt.bdf_order = 3;
  CHECK_THROWS_AS(solve(mesh, sigma, kCf, s, opt), ValidationError);
  opt = {};
  opt.u_init = -1.0;  // below every stimulus: none can ever activate
  CHECK_THROWS_AS(solve(mesh, sigma, kCf, s, opt), SolverError);
  opt = {};
  opt.max_pseudo_steps = 2;
  CHECK_THROWS_AS(solve(mesh, sigma, kCf, s, opt), SolverError);
}

TEST_CASE("stabilization only acts on under-resolved cells", "[eikonal][stabilization]") {
  SECTION("fine mesh: tensor unchanged") {
    auto mesh = build_structured_slab(3, {0.002, 0.001, 0.001}, {20, 10, 10});
    const auto sigma = table_conductivity(mesh);
    CHECK(stabilized_diffusion(mesh, sigma, kCf, 1.0) == sigma);
  }
  SECTION("coarse mesh: eigenvalues raised to the cell-Peclet floor") {
    auto mesh = build_structured_slab(1, {0.01}, {10});
    const auto sigma = table_conductivity(mesh);
    const auto s = stabilized_diffusion(mesh, sigma, kCf, 1.0);
    const double h = 1e-3;
    CHECK_THAT(s[0](0, 0), WithinRel(kCf * std::sqrt(kSigmaF) * h / 2, 1e-12));
    CHECK(stabilized_diffusion(mesh, sigma, kCf, 0.0) == sigma);
  }
}

TEST_CASE("thread count does not change the result", "[eikonal][threads]") {
  auto mesh = build_structured_slab(3, {0.006, 0.004, 0.002}, {12, 8, 4});
  MuscleStimulusSet s;
  s.add_point(mesh, {0, 0, 0}, 0.0, StimulusOrigin::ectopic);
  s.add_point(mesh, {0.006, 0.004, 0.002}, 0.004, StimulusOrigin::pmj);
  EikonalDiffusionSolver solver(mesh, table_conductivity(mesh, {0, 2, 1}), kCf);
  const auto serial = solver.solve(s, {});
  solver.set_threads(4);
  const auto parallel = solver.solve(s, {});
  CHECK(parallel.u == serial.u);
  CHECK(parallel.steps == serial.steps);
}

TEST_CASE("planar fronts in 2D follow the fiber and sheet speeds", "[eikonal][speed]") {
  auto mesh = build_structured_slab(2, {0.01, 0.001}, {40, 2});
  for (int fibers_along_x : {1, 0}) {
    const auto sigma = table_conductivity(mesh, fibers_along_x ? std::array<int, 3>{0, 1, 2} : std::array<int, 3>{1, 0, 2});
    const auto r = solve(mesh, sigma, kCf, face_stimulus(mesh, 0), {});
    const double expected = fibers_along_x ? 0.6 : 60.0 * std::sqrt(0.44e-4);
    CHECK_THAT(fitted_speed(mesh, r.u, 0, 0.0025, 0.0075), WithinRel(expected, 0.05));
  }
}
