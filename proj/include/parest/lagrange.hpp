#pragma once

#include <array>
#include <vector>

#include "parest/common.hpp"

namespace parest {

/// Nodal Lagrange basis of degree p on the reference simplex.
///
/// Nodes are the equispaced lattice points; each node is identified by its integer
/// barycentric multi-index (i_0, ..., i_dim) with sum p. Degree 0 is a single
/// constant function attached to the centroid.
class LagrangeBasis {
 public:
  LagrangeBasis(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(lattice_.size()); }

  /// Barycentric multi-index of node i; unused trailing entries are zero.
  const std::array<int, 3>& lattice(int i) const { return lattice_[i]; }
  Point node(int i) const;

  Vector values(const Point& xi) const;
  /// Reference gradients, 2 x size(); the second row is zero in 1D.
  Matrix gradients(const Point& xi) const;

 private:
  int dim_;
  int degree_;
  std::vector<std::array<int, 3>> lattice_;
  std::vector<std::array<int, 2>> exponents_;
  Matrix coeffs_;  // column i holds monomial coefficients of basis function i
};

/// Shared immutable basis instances (dim in {1,2}, degree 0..8).
const LagrangeBasis& lagrange_basis(int dim, int degree);

}  // namespace parest
