#pragma once

// Simplicial meshes in 1, 2 or 3 dimensions, per-cell fiber triads and
// nodal fields. A d-dimensional mesh uses the first d vertex coordinates;
// the remaining ones are carried along (zero for generated meshes).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eikcouple/errors.hpp"

namespace eikcouple {

using Index = std::size_t;
using Point = std::array<double, 3>;

/// One scalar per mesh vertex. Activation times are stored in seconds.
using NodalField = std::vector<double>;
using ActivationField = NodalField;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline double distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Gradients of the P1 barycentric basis, one column per local vertex.
/// Rows beyond the mesh dimension and columns beyond dim+1 are zero.
using CellGradients = Eigen::Matrix<double, 3, 4>;

class SimplicialMesh {
 public:
  SimplicialMesh() = default;

  /// `cell_vertices` is the flat list of cells, dim+1 indices each. Cells
  /// are reoriented to positive measure. Throws ValidationError (entity =
  /// offending cell) on bad indices, degenerate cells, non-finite
  /// coordinates or a disconnected mesh.
  SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<Index> cell_vertices,
                 std::vector<int> boundary_tags = {})
      : dim_(dim),
        vertices_(std::move(vertices)),
        cells_(std::move(cell_vertices)),
        boundary_tags_(std::move(boundary_tags)) {
    if (dim_ < 1 || dim_ > 3) throw ValidationError("mesh dimension must be 1, 2 or 3");
    const auto nvc = static_cast<std::size_t>(dim_ + 1);
    if (cells_.empty() || cells_.size() % nvc != 0)
      throw ValidationError("cell list is empty or not a multiple of dim+1");
    if (!boundary_tags_.empty() && boundary_tags_.size() != vertices_.size())
      throw ValidationError("boundary tag count differs from vertex count");
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      for (double x : vertices_[v])
        if (!std::isfinite(x))
          throw ValidationError("vertex " + std::to_string(v) + " has a non-finite coordinate");
    for (std::size_t c = 0; c < num_cells(); ++c)
      for (std::size_t k = 0; k < nvc; ++k)
        if (cells_[c * nvc + k] >= vertices_.size())
          throw ValidationError("cell " + std::to_string(c) + " references vertex " +
                                    std::to_string(cells_[c * nvc + k]) + " out of range",
                                c);
    compute_geometry();
    check_connected();
  }

  int dim() const { return dim_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size() / static_cast<std::size_t>(dim_ + 1); }
  std::size_t vertices_per_cell() const { return static_cast<std::size_t>(dim_ + 1); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(Index v) const { return vertices_[v]; }
  std::span<const Index> cell(Index c) const {
    return {cells_.data() + c * vertices_per_cell(), vertices_per_cell()};
  }
  const std::vector<Index>& cell_vertex_list() const { return cells_; }
  const std::vector<int>& boundary_tags() const { return boundary_tags_; }

  double cell_measure(Index c) const { return measures_[c]; }
  const CellGradients& cell_gradients(Index c) const { return gradients_[c]; }

  double total_measure() const { return std::accumulate(measures_.begin(), measures_.end(), 0.0); }

  /// Lumped (vertex-rule) mass: integral of each P1 basis function.
  std::vector<double> lumped_mass() const {
    std::vector<double> m(num_vertices(), 0.0);
    const double share = 1.0 / static_cast<double>(vertices_per_cell());
    for (std::size_t c = 0; c < num_cells(); ++c)
      for (Index v : cell(c)) m[v] += measures_[c] * share;
    return m;
  }

  double average_edge_length() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < num_cells(); ++c) {
      auto vs = cell(c);
      for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
          sum += distance(vertices_[vs[i]], vertices_[vs[j]]);
          ++count;
        }
    }
    return sum / static_cast<double>(count);
  }

  /// Bounding-box diagonal; an upper bound on any geodesic-free distance.
  double bounding_diameter() const {
    Point lo = vertices_.front(), hi = vertices_.front();
    for (const auto& p : vertices_)
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    return distance(lo, hi);
  }

  Index nearest_vertex(const Point& p) const {
    Index best = 0;
    double best_d = kInfinity;
    for (Index v = 0; v < vertices_.size(); ++v) {
      const double d = distance(p, vertices_[v]);
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    return best;
  }

  std::vector<Index> vertices_within(const Point& center, double radius) const {
    std::vector<Index> out;
    for (Index v = 0; v < vertices_.size(); ++v)
      if (distance(center, vertices_[v]) <= radius) out.push_back(v);
    return out;
  }

 private:
  void compute_geometry() {
    const int d = dim_;
    const std::size_t nvc = vertices_per_cell();
    measures_.resize(num_cells());
    gradients_.resize(num_cells());
    double factorial = 1.0;
    for (int k = 2; k <= d; ++k) factorial *= k;

    for (std::size_t c = 0; c < num_cells(); ++c) {
      Index* vs = cells_.data() + c * nvc;
      Eigen::MatrixXd jac(d, d);
      auto fill = [&] {
        for (int k = 0; k < d; ++k)
          for (int r = 0; r < d; ++r) jac(r, k) = vertices_[vs[k + 1]][r] - vertices_[vs[0]][r];
      };
      fill();
      double det = jac.determinant();
      double max_edge = 0.0;
      for (std::size_t i = 0; i < nvc; ++i)
        for (std::size_t j = i + 1; j < nvc; ++j)
          max_edge = std::max(max_edge, distance(vertices_[vs[i]], vertices_[vs[j]]));
      if (!(std::abs(det) > 1e-12 * std::pow(max_edge, d)))
        throw ValidationError("cell " + std::to_string(c) + " is degenerate", c);
      if (det < 0.0) {
        std::swap(vs[0], vs[1]);
        fill();
        det = jac.determinant();
      }
      measures_[c] = det / factorial;

      // rows of jac^{-1} are the gradients of barycentrics 1..d
      const Eigen::MatrixXd inv = jac.inverse();
      CellGradients g = CellGradients::Zero();
      for (int k = 0; k < d; ++k)
        for (int r = 0; r < d; ++r) {
          g(r, k + 1) = inv(k, r);
          g(r, 0) -= inv(k, r);
        }
      gradients_[c] = g;
    }
  }

  void check_connected() const {
    std::vector<Index> parent(vertices_.size());
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    for (std::size_t c = 0; c < num_cells(); ++c) {
      auto vs = cell(c);
      for (std::size_t k = 1; k < vs.size(); ++k) {
        const Index a = find(vs[0]), b = find(vs[k]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    const Index root = find(0);
    for (Index v = 1; v < vertices_.size(); ++v)
      if (find(v) != root)
        throw ValidationError("mesh is not connected (vertex " + std::to_string(v) +
                              " is unreachable from vertex 0)");
  }

  int dim_ = 0;
  std::vector<Point> vertices_;
  std::vector<Index> cells_;
  std::vector<int> boundary_tags_;
  std::vector<double> measures_;
  std::vector<CellGradients> gradients_;
};

/// Per-cell orthonormal (fiber, sheet, normal) triads. In dimension d < 3
/// only the first d directions are used; the others are zero.
class FiberField {
 public:
  using Triad = std::array<Point, 3>;

  FiberField() = default;
  FiberField(int dim, std::vector<Triad> triads) : dim_(dim), triads_(std::move(triads)) {
    for (std::size_t c = 0; c < triads_.size(); ++c)
      if (!is_orthonormal(triads_[c]))
        throw ValidationError("fiber triad of cell " + std::to_string(c) + " is not orthonormal", c);
  }

  /// Fibers along coordinate axis `axes[0]`, sheets along `axes[1]`,
  /// normals along `axes[2]`. Axes must be a permutation of {0, 1, 2}
  /// whose used entries are < dim.
  static FiberField axis_aligned(int dim, std::size_t num_cells, std::array<int, 3> axes = {0, 1, 2}) {
    Triad t{};
    for (int k = 0; k < dim; ++k) {
      if (axes[k] < 0 || axes[k] >= dim) throw ValidationError("fiber axis out of range for mesh dimension");
      t[k] = Point{0.0, 0.0, 0.0};
      t[k][axes[k]] = 1.0;
    }
    return FiberField(dim, std::vector<Triad>(num_cells, t));
  }

  int dim() const { return dim_; }
  std::size_t size() const { return triads_.size(); }
  const Triad& operator[](std::size_t c) const { return triads_[c]; }
  const std::vector<Triad>& triads() const { return triads_; }

  bool is_orthonormal(const Triad& t, double tol = 1e-10) const {
    auto dot = [](const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
    for (int i = 0; i < 3; ++i) {
      if (i >= dim_) {
        if (dot(t[i], t[i]) != 0.0) return false;
        continue;
      }
      if (std::abs(dot(t[i], t[i]) - 1.0) > tol) return false;
      for (int j = i + 1; j < dim_; ++j)
        if (std::abs(dot(t[i], t[j])) > tol) return false;
      for (int r = dim_; r < 3; ++r)
        if (std::abs(t[i][r]) > tol) return false;
    }
    return true;
  }

 private:
  int dim_ = 0;
  std::vector<Triad> triads_;
};

/// Boundary tag bits written by build_structured_slab: bit 2k marks the
/// lower face of axis k, bit 2k+1 the upper face.
inline constexpr int slab_face_bit(int axis, bool upper) { return 1 << (2 * axis + (upper ? 1 : 0)); }

/// Structured simplicial subdivision of [0,L0]x...x[0,L(d-1)]. Squares are
/// split into 2 triangles, cubes into 6 tetrahedra (Kuhn subdivision).
inline SimplicialMesh build_structured_slab(int dim, std::span<const double> lengths,
                                            std::span<const int> divisions) {
  if (dim < 1 || dim > 3) throw ValidationError("slab dimension must be 1, 2 or 3");
  if (lengths.size() < static_cast<std::size_t>(dim) || divisions.size() < static_cast<std::size_t>(dim))
    throw ValidationError("slab needs one length and one division count per axis");
  std::array<int, 3> n{0, 0, 0};
  std::array<double, 3> h{0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) {
    if (divisions[k] < 1) throw ValidationError("slab divisions must be >= 1");
    if (!(lengths[k] > 0.0)) throw ValidationError("slab lengths must be > 0");
    n[k] = divisions[k];
    h[k] = lengths[k] / divisions[k];
  }
  const std::size_t sx = n[0] + 1, sy = n[1] + 1, sz = n[2] + 1;
  auto id = [&](int i, int j, int k) { return static_cast<Index>(i + sx * (j + sy * k)); };

  std::vector<Point> verts;
  std::vector<int> tags;
  verts.reserve(sx * sy * sz);
  for (int k = 0; k <= n[2]; ++k)
    for (int j = 0; j <= n[1]; ++j)
      for (int i = 0; i <= n[0]; ++i) {
        // i*h keeps the upper face exactly at L only up to rounding; pin it.
        const std::array<int, 3> ijk{i, j, k};
        Point p{0.0, 0.0, 0.0};
        int tag = 0;
        for (int a = 0; a < dim; ++a) {
          p[a] = ijk[a] == n[a] ? lengths[a] : ijk[a] * h[a];
          if (ijk[a] == 0) tag |= slab_face_bit(a, false);
          if (ijk[a] == n[a]) tag |= slab_face_bit(a, true);
        }
        verts.push_back(p);
        tags.push_back(tag);
      }

  std::vector<Index> cells;
  if (dim == 1) {
    for (int i = 0; i < n[0]; ++i) cells.insert(cells.end(), {id(i, 0, 0), id(i + 1, 0, 0)});
  } else if (dim == 2) {
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        cells.insert(cells.end(), {id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0)});
        cells.insert(cells.end(), {id(i, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0)});
      }
  } else {
    static constexpr std::array<std::array<int, 3>, 6> perms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j)
        for (int i = 0; i < n[0]; ++i)
          for (const auto& perm : perms) {
            std::array<int, 3> c{i, j, k};
            cells.push_back(id(c[0], c[1], c[2]));
            for (int step = 0; step < 3; ++step) {
              ++c[perm[step]];
              cells.push_back(id(c[0], c[1], c[2]));
            }
          }
  }
  return SimplicialMesh(dim, std::move(verts), std::move(cells), std::move(tags));
}

inline SimplicialMesh build_structured_slab(int dim, std::initializer_list<double> lengths,
                                            std::initializer_list<int> divisions) {
  return build_structured_slab(dim, std::span<const double>(lengths.begin(), lengths.size()),
                               std::span<const int>(divisions.begin(), divisions.size()));
}

}  // namespace eikcouple
