#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "parest/parallel.hpp"
#include "parest/scalar_space.hpp"

namespace parest {

enum class OperatorKind { mass, stiffness };

/// Symmetric sparse matrix on the free dofs of a space.
class SymmetricOperator {
 public:
  SymmetricOperator() = default;
  explicit SymmetricOperator(SparseMatrix matrix) : matrix_(std::move(matrix)) {}

  int dimension() const { return static_cast<int>(matrix_.rows()); }
  const SparseMatrix& matrix() const { return matrix_; }
  Vector apply(const Vector& x) const { return matrix_ * x; }

 private:
  SparseMatrix matrix_;
};

/// Element matrices for every cell, in local dof order.
std::vector<Matrix> element_matrices(const ScalarSpace& space, OperatorKind kind, Execution exec = Execution::parallel);

/// Matrix over all dofs (constrained ones included).
SparseMatrix assemble_full(const ScalarSpace& space, OperatorKind kind, Execution exec = Execution::parallel);

/// Operator on free dofs (Dirichlet rows and columns removed).
SymmetricOperator assemble(const ScalarSpace& space, OperatorKind kind, Execution exec = Execution::parallel);

using SpatialFunction = std::function<double(const Point&)>;

/// Load vector (fn, phi_i) on free dofs.
Vector load_vector(const ScalarSpace& space, const SpatialFunction& fn, int quad_degree = -1);
/// Load vector of a broken polynomial field defined on the space's mesh or a coarser nested mesh.
Vector load_vector(const ScalarSpace& space, const CellField& field, const std::vector<int>& parent = {});

/// Cholesky-type factorization with a residual check after every solve.
class SpdSolver {
 public:
  explicit SpdSolver(const SymmetricOperator& op);
  Vector solve(const Vector& rhs) const;
  int dimension() const { return op_.dimension(); }

 private:
  SymmetricOperator op_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

Vector solve_spd(const SymmetricOperator& op, const Vector& rhs);

/// L2 projection onto the space (free coefficients).
Vector l2_projection(const ScalarSpace& space, const SpatialFunction& fn);

/// Matrix mapping free coefficients on `coarse` to free coefficients of the same
/// function on the nested space `fine`. Throws InvalidArgument if not nested.
SparseMatrix prolongation(const ScalarSpace& coarse, const ScalarSpace& fine);

struct StabilityEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  /// The sup is taken over the probe space only, so the value bounds C_Pi from below.
  bool lower_estimate = true;
};

StabilityEstimate estimate_h1_stability(const ScalarSpace& space, const ScalarSpace& lift_space);
double estimate_h1_stability_constant(const ScalarSpace& space, const ScalarSpace& lift_space);

}  // namespace parest
