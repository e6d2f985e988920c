#pragma once

#include <memory>
#include <vector>

#include "parest/parallel.hpp"
#include "parest/rtn.hpp"
#include "parest/timestepping.hpp"

namespace parest {

/// Broken polynomial on the cells of a vertex patch, local Lagrange coefficients
/// with one column per patch cell (same order as VertexPatch::cells).
struct PatchPolynomial {
  int dim = 1;
  int degree = 0;
  std::vector<int> cells;
  Matrix coeffs;

  double value(int j, const Point& xi) const;
};

struct PatchVectorPolynomial {
  PatchPolynomial x, y;
};

/// Local flux on one patch: coefficients for a subset of global RTN dofs.
struct PatchFlux {
  int vertex = -1;
  std::vector<int> dofs;
  Vector coeffs;
  double objective = 0.0;            // ||sigma + target||_{omega_a}
  double constraint_residual = 0.0;  // ||div sigma - g||_{omega_a}
  double source_norm = 0.0;          // ||g||_{omega_a}
  double kkt_residual = 0.0;         // relative residual of the saddle-point system

  /// Scatter into a zero vector of the given global size.
  Vector global(int num_dofs) const;
};

/// Mixed RTN / discontinuous P problem on one vertex patch. The saddle-point system is
/// reduced to its Schur complement and factored once; solve() can be called for many
/// right-hand sides.
class PatchSolver {
 public:
  PatchSolver(std::shared_ptr<const RTNSpace> space, const VertexPatch& patch);

  /// Minimizes ||v + target|| over the patch flux space subject to div v = g in the
  /// patch pressure space. Interior patches require g to have zero mean.
  PatchFlux solve(const PatchPolynomial& g, const PatchVectorPolynomial& target) const;

  const std::vector<int>& dofs() const { return free_dofs_; }
  const VertexPatch& patch() const { return patch_; }
  int pressure_dimension() const { return static_cast<int>(pressure_rows_); }

 private:
  struct CellTable {
    std::vector<double> weights;  // quadrature weight times |det J|
    std::vector<Point> points;    // reference points
    std::vector<Matrix> values;   // 2 x local_size per point
    std::vector<Vector> divs;
    std::vector<int> local_to_patch;  // -1 for constrained dofs
  };

  std::shared_ptr<const RTNSpace> space_;
  VertexPatch patch_;
  std::vector<int> free_dofs_;
  std::vector<CellTable> tables_;
  Matrix pressure_values_;  // q basis at quadrature points (rows = points, cols = basis)
  Eigen::Index pressure_rows_ = 0;
  Matrix b_;                // pressure x flux
  Eigen::LLT<Matrix> mass_llt_;
  Eigen::LLT<Matrix> schur_llt_;
  Matrix mass_;
};

/// Patch source psi_a f - psi_a dU/dt - grad psi_a . grad u_n on interval n, as exact
/// per-cell polynomials. degree < 0 selects the smallest exact degree.
PatchPolynomial patch_source(const TimeSlabSolution& sol, const VertexPatch& patch, int interval, int degree = -1);

/// psi_a grad u_n on the patch cells, exact in P_p per component.
PatchVectorPolynomial patch_target(const TimeSlabSolution& sol, const VertexPatch& patch, int interval);

PatchFlux solve_patch(std::shared_ptr<const RTNSpace> space, const VertexPatch& patch, const PatchPolynomial& g,
                      const PatchVectorPolynomial& target);

/// Globally H(div)-conforming flux, piecewise constant in time.
struct EquilibratedFlux {
  std::shared_ptr<const RTNSpace> space;
  std::vector<Vector> coeffs;  // per interval
  double max_constraint_residual = 0.0;  // max over patches of ||div - g|| / (1 + ||g||)
  double max_kkt_residual = 0.0;

  int degree() const { return space->order(); }
  int num_intervals() const { return static_cast<int>(coeffs.size()); }
};

/// Sum of patch fluxes over all vertices. Patches are solved concurrently; the sum
/// is formed in vertex order so the result does not depend on the thread count.
EquilibratedFlux assemble_flux(const TimeSlabSolution& sol, int flux_degree, Execution exec = Execution::parallel);

/// max |f - dU/dt - div sigma| over quadrature points, divided by 1 + max |f|.
double equilibration_residual(const EquilibratedFlux& flux, const TimeSlabSolution& sol);

/// Largest normal-trace jump across interior faces on interval n (face Gauss points).
double max_normal_jump(const RTNSpace& space, const Vector& coeffs);

}  // namespace parest
