#pragma once

#include <memory>
#include <span>
#include <vector>

#include "parest/lagrange.hpp"
#include "parest/mesh.hpp"

namespace parest {

/// Continuous piecewise P_p Lagrange space with homogeneous Dirichlet constraints.
///
/// Coefficient vectors passed around the library are indexed by free (unconstrained)
/// dofs; expand() inserts the zero boundary values.
class ScalarSpace {
 public:
  ScalarSpace(MeshPtr mesh, int degree);

  const SimplicialMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  const LagrangeBasis& basis() const { return *basis_; }

  int num_dofs() const { return static_cast<int>(points_.size()); }
  /// Number of free dofs.
  int dimension() const { return static_cast<int>(free_dofs_.size()); }
  int local_size() const { return basis_->size(); }

  std::span<const int> cell_dofs(int k) const {
    return {cell_dofs_.data() + static_cast<size_t>(k) * local_size(), static_cast<size_t>(local_size())};
  }
  const Point& dof_point(int i) const { return points_[i]; }
  bool is_dirichlet(int i) const { return free_index_[i] < 0; }
  int free_index(int i) const { return free_index_[i]; }
  const std::vector<int>& free_dofs() const { return free_dofs_; }

  Vector expand(const Vector& free) const;
  Vector restrict_to_free(const Vector& all) const;
  /// Local coefficients of a free vector on cell k.
  Vector local_coefficients(const Vector& free, int k) const;

  double evaluate(const Vector& free, int k, const Point& xi) const;
  Point gradient(const Vector& free, int k, const Point& xi) const;

  /// Free coefficients of the nodal interpolant of fn.
  template <class F>
  Vector interpolate(F&& fn) const {
    Vector v(dimension());
    for (int i = 0; i < dimension(); ++i) v[i] = fn(points_[free_dofs_[i]]);
    return v;
  }

 private:
  MeshPtr mesh_;
  int degree_;
  const LagrangeBasis* basis_;
  std::vector<int> cell_dofs_;
  std::vector<Point> points_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
};

using SpacePtr = std::shared_ptr<const ScalarSpace>;

/// Broken (per-cell) polynomial field of a fixed degree in the local Lagrange basis.
class CellField {
 public:
  CellField() = default;
  CellField(MeshPtr mesh, int degree);

  const MeshPtr& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int local_size() const { return static_cast<int>(coeffs_.rows()); }
  Matrix& coefficients() { return coeffs_; }
  const Matrix& coefficients() const { return coeffs_; }

  double value(int k, const Point& xi) const;
  /// Value at a physical point inside cell k.
  double value_at(int k, const Point& x) const;

  /// Elementwise L2 projection of fn(x) using quadrature of the given degree.
  template <class F>
  static CellField project(MeshPtr mesh, int degree, F&& fn, int quad_degree);

  /// Elementwise L2 projection of another cell field living on this mesh or a coarser nested one.
  static CellField project_field(MeshPtr mesh, int degree, const CellField& source, const std::vector<int>& parent);

 private:
  static const Matrix& reference_mass_inverse(int dim, int degree);

  MeshPtr mesh_;
  int degree_ = 0;
  Matrix coeffs_;
};

}  // namespace parest

#include "parest/quadrature.hpp"

namespace parest {

template <class F>
CellField CellField::project(MeshPtr mesh, int degree, F&& fn, int quad_degree) {
  CellField field(mesh, degree);
  const auto& rule = cached_simplex_rule(mesh->dim(), quad_degree);
  const auto& basis = lagrange_basis(mesh->dim(), degree);
  const Matrix& minv = reference_mass_inverse(mesh->dim(), degree);
  std::vector<Vector> phi(rule.size());
  for (int q = 0; q < rule.size(); ++q) phi[q] = basis.values(rule.points[q]);
  for (int k = 0; k < mesh->num_cells(); ++k) {
    const auto& g = mesh->geometry(k);
    Vector rhs = Vector::Zero(basis.size());
    for (int q = 0; q < rule.size(); ++q) rhs += rule.weights[q] * fn(g.map(rule.points[q])) * phi[q];
    field.coeffs_.col(k) = minv * rhs;
  }
  return field;
}

}  // namespace parest
