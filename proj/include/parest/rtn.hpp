#pragma once

#include <span>
#include <vector>

#include "parest/mesh.hpp"

namespace parest {

/// H(div)-conforming Raviart-Thomas-Nedelec space RTN_k on a simplicial mesh.
///
/// Degrees of freedom: normal moments on every face against Legendre polynomials
/// in the face parameter (running from the lower to the higher global vertex
/// index, normal fixed per face), then interior moments against P_{k-1}^d. In 1D
/// the space is continuous piecewise P_{k+1}, with point values as face dofs.
/// Each cell stores its nodal (dual) basis in scaled monomial coordinates.
class RTNSpace {
 public:
  RTNSpace(MeshPtr mesh, int order);

  const SimplicialMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  int order() const { return order_; }
  int local_size() const { return local_size_; }
  int face_dofs() const { return face_dofs_; }
  int interior_dofs() const { return interior_dofs_; }
  int num_dofs() const { return num_dofs_; }

  std::span<const int> cell_dofs(int k) const {
    return {cell_dofs_.data() + static_cast<size_t>(k) * local_size_, static_cast<size_t>(local_size_)};
  }
  int face_dof(int face, int j) const { return face * face_dofs_ + j; }

  /// Physical values (2 x local_size) and divergences of the local basis at a reference point.
  void evaluate(int k, const Point& xi, Matrix& values, Vector& divergence) const;

  /// Field value and divergence of a global coefficient vector on cell k at a reference point.
  Point value(const Vector& coeffs, int k, const Point& xi) const;
  double divergence(const Vector& coeffs, int k, const Point& xi) const;

  /// Face parametrization point at t in [0,1] (low to high vertex).
  Point face_point(int face, double t) const;

 private:
  void prebasis(int k, const Point& x, Matrix& values, Vector& divergence) const;

  MeshPtr mesh_;
  int order_;
  int local_size_ = 0;
  int face_dofs_ = 0;
  int interior_dofs_ = 0;
  int num_dofs_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<Matrix> dual_;  // per cell: prebasis coefficients of the nodal basis
  std::vector<std::array<int, 2>> exponents_;
};

}  // namespace parest
