#include "catch_amalgamated.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "eikcouple/mesh_io.hpp"

using namespace eikcouple;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / "mesh_io_scratch";
  fs::create_directories(dir);
  return dir / name;
}

std::string write(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SimplicialMesh odd_coordinates_mesh() {
  auto base = build_structured_slab(3, {0.0123, 0.00457, 0.0019}, {3, 2, 2});
  auto verts = base.vertices();
  for (auto& v : verts) v[0] += 1.0 / 3.0 * 1e-4;
  return SimplicialMesh(3, verts, base.cell_vertex_list());
}

void check_same_mesh(const SimplicialMesh& a, const SimplicialMesh& b) {
  REQUIRE(a.dim() == b.dim());
  REQUIRE(a.num_vertices() == b.num_vertices());
  REQUIRE(a.num_cells() == b.num_cells());
  for (Index v = 0; v < a.num_vertices(); ++v)
    for (int k = 0; k < 3; ++k) CHECK(std::abs(a.vertex(v)[k] - b.vertex(v)[k]) <= 1e-12);
  CHECK(a.cell_vertex_list() == b.cell_vertex_list());
}

template <class F>
std::size_t parse_error_line(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("number formatting", "[io]") {
  CHECK(format_number(1.0 / 3.0, 9) == "0.333333333");
  CHECK(format_number(12.3456789012, kTimeDigits) == "12.3456789");
  CHECK(format_number(kInfinity, 9) == "inf");
  CHECK(format_number(-kInfinity, 9) == "-inf");
  CHECK(std::stod(format_number(0.1 + 0.2, kCoordinateDigits)) == 0.1 + 0.2);
}

TEST_CASE("text mesh round trip", "[io]") {
  const auto mesh = odd_coordinates_mesh();
  const auto path = scratch("roundtrip.mesh").string();
  write_text_mesh(path, mesh);
  check_same_mesh(mesh, load_mesh(path));
}

TEST_CASE("VTK round trip with a time field", "[io]") {
  const auto mesh = odd_coordinates_mesh();
  std::vector<double> u(mesh.num_vertices());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 0.2);
  for (double& x : u) x = d(rng);
  const auto ms = to_milliseconds(u);
  const auto path = scratch("roundtrip.vtk").string();
  write_vtk(path, mesh, {{"activation_time_ms", &ms}});
  const auto back = read_vtk(path);
  check_same_mesh(mesh, back.mesh);
  REQUIRE(back.point_scalars.contains("activation_time_ms"));
  const auto& got = back.point_scalars.at("activation_time_ms");
  for (Index v = 0; v < mesh.num_vertices(); ++v) CHECK(std::abs(got[v] - ms[v]) <= 5e-9 * std::abs(ms[v]));
  CHECK(slurp(path).find("POINT_DATA " + std::to_string(mesh.num_vertices())) != std::string::npos);
}

TEST_CASE("VTK round trip in 1D and 2D", "[io]") {
  for (int dim : {1, 2}) {
    auto mesh = dim == 1 ? build_structured_slab(1, {0.01}, {5}) : build_structured_slab(2, {0.01, 0.02}, {3, 4});
    const auto path = scratch("dim" + std::to_string(dim) + ".vtk").string();
    write_vtk(path, mesh);
    check_same_mesh(mesh, load_mesh(path));
  }
}

TEST_CASE("smallest mesh reads back", "[io]") {
  const auto path = write("line.mesh", "1 2 1\n0\n0.001\n0 1\n");
  const auto m = load_mesh(path);
  CHECK(m.num_vertices() == 2);
  CHECK(m.total_measure() == Catch::Approx(0.001));
}

TEST_CASE("activation CSV layout", "[io]") {
  auto mesh = build_structured_slab(1, {0.002}, {2});
  const auto path = scratch("act.csv").string();
  write_activation_csv(path, mesh, {0.0, 0.0012345678912, 0.002});
  CHECK(slurp(path) ==
        "vertex,x,y,z,u_ms\n"
        "0,0,0,0,0\n"
        "1,0.001,0,0,1.23456789\n"
        "2,0.002,0,0,2\n");
}

TEST_CASE("malformed text meshes name the line", "[io][errors]") {
  CHECK(parse_error_line([] { read_text_mesh(write("bad_dim.mesh", "4 2 1\n0\n1\n0 1\n")); }) == 1);
  CHECK(parse_error_line([] { read_text_mesh(write("bad_coord.mesh", "1 2 1\n0\nabc\n0 1\n")); }) == 3);
  CHECK(parse_error_line([] { read_text_mesh(write("short.mesh", "1 3 2\n0\n1\n2\n0 1\n")); }) == 5);
  CHECK(parse_error_line([] { read_text_mesh(write("trailing.mesh", "1 2 1\n0\n1\n0 1\n7\n")); }) == 5);
  CHECK(parse_error_line([] { read_text_mesh(write("neg.mesh", "1 2 1\n0\n1\n0 -1\n")); }) == 4);
}

TEST_CASE("out-of-range cell index is located", "[io][errors]") {
  const auto path = write("range.mesh", "1 3 2\n0\n1\n2\n0 1\n1 5\n");
  try {
    read_text_mesh(path);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("range.mesh:6:") != std::string::npos);
  }
}

TEST_CASE("malformed VTK files", "[io][errors]") {
  CHECK(parse_error_line([] { read_vtk(write("nohdr.vtk", "hello\nt\nASCII\n")); }) == 1);
  CHECK(parse_error_line([] { read_vtk(write("binary.vtk", "# vtk DataFile Version 3.0\nt\nBINARY\n")); }) == 3);
  CHECK(parse_error_line([] {
          read_vtk(write("grid.vtk", "# vtk DataFile Version 3.0\nt\nASCII\nDATASET STRUCTURED_POINTS\n"));
        }) == 4);
  CHECK(parse_error_line([] {
          read_vtk(write("quad.vtk",
                         "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n"
                         "POINTS 4 double\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
                         "CELLS 1 5\n4 0 1 2 3\nCELL_TYPES 1\n9\n"));
        }) == 11);
  CHECK_THROWS_AS(read_vtk(scratch("missing.vtk").string()), ParseError);
}
