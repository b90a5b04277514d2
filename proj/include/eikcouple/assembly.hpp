#pragma once

// P1 finite-element assembly on SimplicialMesh: a fixed sparsity pattern
// with per-cell scatter slots, anisotropic stiffness and lumped reaction.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "eikcouple/mesh.hpp"

namespace eikcouple {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// One symmetric 3x3 tensor per cell (rows/cols beyond the mesh dimension
/// are ignored by assembly).
using TensorField = std::vector<Eigen::Matrix3d>;

/// Sparsity pattern of the P1 operator plus, for each cell, the position
/// of every local (i, j) coupling inside the compressed value array.
class AssemblyWorkspace {
 public:
  AssemblyWorkspace() = default;

  explicit AssemblyWorkspace(const SimplicialMesh& mesh) : nvc_(mesh.vertices_per_cell()) {
    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_cells() * nvc_ * nvc_);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c)
      for (Index a : mesh.cell(c))
        for (Index b : mesh.cell(c))
          trip.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b), 0.0);
    pattern_.resize(n, n);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slots_.resize(mesh.num_cells() * nvc_ * nvc_);
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      auto vs = mesh.cell(c);
      for (std::size_t j = 0; j < nvc_; ++j) {
        const auto col = static_cast<Eigen::Index>(vs[j]);
        const auto* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col];
        const auto* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col + 1];
        for (std::size_t i = 0; i < nvc_; ++i) {
          const auto* it = std::lower_bound(begin, end, static_cast<SparseMatrix::StorageIndex>(vs[i]));
          slots_[(c * nvc_ + i) * nvc_ + j] = static_cast<std::size_t>(it - pattern_.innerIndexPtr());
        }
      }
    }

    rows_.resize(static_cast<std::size_t>(pattern_.nonZeros()));
    cols_.resize(rows_.size());
    for (Eigen::Index col = 0; col < pattern_.outerSize(); ++col)
      for (auto k = pattern_.outerIndexPtr()[col]; k < pattern_.outerIndexPtr()[col + 1]; ++k) {
        rows_[static_cast<std::size_t>(k)] = static_cast<Index>(pattern_.innerIndexPtr()[k]);
        cols_[static_cast<std::size_t>(k)] = static_cast<Index>(col);
      }
    lumped_mass_ = mesh.lumped_mass();
  }

  /// All-zero matrix carrying the FE sparsity.
  const SparseMatrix& pattern() const { return pattern_; }

  /// Position in valuePtr() of the coupling between local vertices i and j of cell c.
  std::size_t slot(std::size_t cell, std::size_t i, std::size_t j) const {
    return slots_[(cell * nvc_ + i) * nvc_ + j];
  }

  Index row_of(std::size_t k) const { return rows_[k]; }
  Index col_of(std::size_t k) const { return cols_[k]; }
  std::size_t nonzeros() const { return rows_.size(); }

  const std::vector<double>& lumped_mass() const { return lumped_mass_; }

 private:
  std::size_t nvc_ = 0;
  SparseMatrix pattern_;
  std::vector<std::size_t> slots_;
  std::vector<Index> rows_, cols_;
  std::vector<double> lumped_mass_;
};

namespace detail {

inline void check_tensor(const Eigen::Matrix3d& s, int dim, std::size_t cell) {
  const Eigen::MatrixXd block = s.topLeftCorner(dim, dim);
  const double scale = std::max(block.cwiseAbs().maxCoeff(), 1e-300);
  if ((block - block.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError("conductivity tensor of cell " + std::to_string(cell) + " is not symmetric", cell);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
    throw ValidationError("conductivity tensor of cell " + std::to_string(cell) + " is indefinite", cell);
}

}  // namespace detail

/// Adds the anisotropic stiffness |K| grad(phi_i) . S grad(phi_j) of every
/// cell into `values` (the valuePtr() of a matrix with the workspace pattern).
inline void add_stiffness(const SimplicialMesh& mesh, const TensorField& sigma, const AssemblyWorkspace& ws,
                          double* values) {
  const std::size_t nvc = mesh.vertices_per_cell();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const CellGradients& g = mesh.cell_gradients(c);
    const Eigen::Matrix<double, 3, 4> sg = sigma[c] * g;
    const double vol = mesh.cell_measure(c);
    for (std::size_t i = 0; i < nvc; ++i)
      for (std::size_t j = 0; j < nvc; ++j)
        values[ws.slot(c, i, j)] += vol * g.col(static_cast<Eigen::Index>(i)).dot(sg.col(static_cast<Eigen::Index>(j)));
  }
}

struct AssembledOperator {
  SparseMatrix matrix;
  AssemblyWorkspace workspace;
};

/// Galerkin P1 discretisation of  -div(S grad u) + r u : anisotropic
/// stiffness plus lumped-mass reaction diag(m_i r_i). `sigma` holds one
/// symmetric positive semidefinite tensor per cell; `reaction` one value
/// per vertex (empty means zero).
inline AssembledOperator assemble_operator(const SimplicialMesh& mesh, const TensorField& sigma,
                                           const std::vector<double>& reaction = {}) {
  if (sigma.size() != mesh.num_cells()) throw ValidationError("one conductivity tensor per cell is required");
  if (!reaction.empty() && reaction.size() != mesh.num_vertices())
    throw ValidationError("reaction coefficient must have one value per vertex");
  for (std::size_t c = 0; c < sigma.size(); ++c) detail::check_tensor(sigma[c], mesh.dim(), c);

  AssembledOperator op{SparseMatrix{}, AssemblyWorkspace(mesh)};
  op.matrix = op.workspace.pattern();
  add_stiffness(mesh, sigma, op.workspace, op.matrix.valuePtr());
  if (!reaction.empty()) {
    const auto& m = op.workspace.lumped_mass();
    for (Index v = 0; v < mesh.num_vertices(); ++v)
      op.matrix.coeffRef(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) += m[v] * reaction[v];
  }
  return op;
}

}  // namespace eikcouple
