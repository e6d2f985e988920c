#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "parest/equilibration.hpp"
#include "parest/verification.hpp"

namespace parest {

/// An estimator with its squared contributions per (cell, interval). Single-mode runs
/// have one "cell".
struct LocalizedEstimator {
  double total = 0.0;
  Matrix local;  // cells x intervals, squared values

  double local_sum() const { return local.sum(); }
};

/// eta_J^2 = sum_n tau_n/3 ||grad(u_n - u_{n-1})||^2.
LocalizedEstimator jump_estimator(const TimeSlabSolution& sol);

struct FluxEstimators {
  LocalizedEstimator F;                // ||sigma + grad U||_X
  LocalizedEstimator F_prime;          // ||sigma + grad u_h,tau||_X
  LocalizedEstimator F_double_prime;   // ||sigma + grad ubar||_X
  /// Per interval, ||sigma + grad U(t)||^2 = c0 + 2 s c1 + s^2 c2 with s = (t - t_{n-1}) / tau_n.
  std::vector<std::array<double, 3>> time_profile;
};

FluxEstimators flux_estimators(const TimeSlabSolution& sol, const EquilibratedFlux& flux);

/// Lifts on vertex patches: H^{-1}(omega_a) norms with test functions of a nested
/// finer space that vanish outside the patch of a coarse mesh.
class PatchLifts {
 public:
  PatchLifts(MeshPtr coarse, SpacePtr lift);

  int num_patches() const { return static_cast<int>(patches_.size()); }
  const VertexPatch& patch(int a) const { return patches_[a]; }
  const std::vector<VertexPatch>& patches() const { return patches_; }
  /// Squared dual norm of a functional given on the free dofs of the lift space.
  double dual_norm_sq(int a, const Vector& functional) const;
  const SpacePtr& lift_space() const { return lift_; }

 private:
  MeshPtr coarse_;
  SpacePtr lift_;
  std::vector<VertexPatch> patches_;
  std::vector<std::vector<int>> dofs_;
  std::vector<std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>>> factors_;
};

enum class OscillationKind { Y, X_bound, patch, energy };
const char* oscillation_name(OscillationKind kind);

/// Exact data of a run. A null source means f = f_h,tau; a null initial datum means u_0 = u_h,tau,0.
struct ProblemData {
  SourcePtr f;
  SpatialFunction u0;
};

struct Oscillation {
  OscillationKind kind = OscillationKind::Y;
  double value = 0.0;
  std::vector<double> per_interval;  // squared contributions (Y and X_bound)
  Matrix per_patch;                  // vertices x intervals, squared (patch kind)
  std::string surrogate;             // what the number actually is
  int iterations = 0;                // conjugate gradient steps (energy kind)
};

/// Data oscillation between f and f_h,tau. Dual norms are sups over the lift space of ctx;
/// the patch kind needs a lift space nested in the solution mesh.
Oscillation oscillation(const TimeSlabSolution& sol, const ProblemData& data, OscillationKind kind,
                        const RieszLiftContext& ctx, int time_points = 8);

/// sup over continuous piecewise affine (in time) phi with values in the lift space of
/// (int <g, phi> dt + (e0, phi(0))) / ||phi||_{Y_star}. With pin_initial, phi(0) = 0.
struct DualSup {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};
DualSup spacetime_dual_sup(const LoadHistory& g, const Vector& initial_functional, const TimePartition& partition,
                           const RieszLiftContext& ctx, bool pin_initial, double tol = 1e-10, int max_iterations = 20000);

/// ||u_0 - u_h,tau,0|| by quadrature on the solution mesh (zero without an exact initial datum).
double initial_error(const TimeSlabSolution& sol, const ProblemData& data);

/// Right-hand side of the guaranteed Y-norm bound:
/// (int (||sigma + grad U|| + ||f - f_h,tau||_{-1})^2 dt + ||u_0 - u_h,tau,0||^2)^{1/2}.
double upper_estimator_Y(const TimeSlabSolution& sol, const FluxEstimators& flux, const ProblemData& data,
                         const RieszLiftContext& ctx);

/// Right-hand side of the guaranteed energy bound for the averaged reconstruction:
/// (eta_J^2/4 + eta_F''^2)^{1/2} + energy oscillation.
double upper_estimator_energy(const TimeSlabSolution& sol, const FluxEstimators& flux, double eta_J,
                              const ProblemData& data, const RieszLiftContext& ctx);

enum class Theorem {
  Y_upper_4_1,
  Y_lower_4_1,
  osc_dominated_4_2,
  X_upper_4_3,
  energy_4_5,
  hypercircle_4_6,
  Y_upper_5_1,
  EY_5_2,
  X_lower_5_3,
  energy_5_5
};
const char* theorem_name(Theorem t);
std::optional<Theorem> theorem_from_name(const std::string& name);
const std::vector<Theorem>& all_theorems();

struct BoundInputs {
  const TimeSlabSolution* solution = nullptr;
  const EquilibratedFlux* flux = nullptr;  // needed by the fully discrete bounds
  const ReferenceSolution* reference = nullptr;
  ProblemData data;
  double allowance = 0.02;
  int min_reference_ratio = 4;
};

struct BoundReport {
  Theorem theorem = Theorem::Y_upper_4_1;
  std::string name;
  double error = 0.0;        // error surrogate in the norm of the statement
  double estimator = 0.0;    // estimator side
  double effectivity = 0.0;  // estimator / error
  bool upper_bound = true;   // false: the statement bounds the estimator by the error
  bool satisfied = false;    // within the allowance
  double measured_constant = 0.0;
  std::vector<double> local_constants;
  std::vector<std::pair<std::string, double>> details;
  std::string surrogate;
  int reference_space_ratio = 0;
  int reference_time_ratio = 0;

  double detail(const std::string& key) const;
};

/// Both sides of a bound, the error computed against the reference solution.
/// Throws RefinementError if the reference is not fine enough.
BoundReport bound_report(const BoundInputs& inputs, Theorem theorem);

struct EstimatorReport {
  LocalizedEstimator eta_J;
  std::optional<FluxEstimators> flux;
  Oscillation osc_Y, osc_X_bound, osc_patch, osc_energy;
  double initial_term = 0.0;  // ||u_0 - u_h,tau,0||
  double gamma = 0.0;         // max h_omega^2 / tau_n
  std::vector<BoundReport> bounds;

  /// Per (cell, interval) squared oscillation: each patch value split evenly over its cells.
  Matrix localized_oscillation(const SimplicialMesh& mesh) const;
};

EstimatorReport estimator_report(const BoundInputs& inputs, const std::vector<Theorem>& theorems);

/// max over patches and intervals of h_omega^2 / tau_n.
double patch_gamma(const SimplicialMesh& mesh, const TimePartition& partition);

struct InefficiencyRow {
  double lambda = 0.0;
  double error_u = 0.0;    // ||u - u_tau||_{L2(0,1)}
  double error_U = 0.0;    // ||u - U_tau||_{L2(0,1)}
  double eta_J = 0.0;      // modal metric
  double ratio_u = 0.0;    // ||u - u_tau||_X / eta_J
  double ratio_U = 0.0;    // ||u - U_tau||_X / eta_J
  double ratio_uU = 0.0;   // ||u - u_tau|| / ||u - U_tau||
};

struct InefficiencyStudy {
  std::vector<InefficiencyRow> rows;
  bool ratio_strictly_decreasing = false;
  bool large_lambda_tail_decreasing = false;  // ratio_u falls as lambda grows (upper half)
  bool small_lambda_tail_decreasing = false;  // ratio_U falls as lambda shrinks (lower half)
};

/// One implicit Euler step of u' + lambda u = 1 on (0,1) for each lambda.
InefficiencyStudy inefficiency_study(const std::vector<double>& lambdas);

}  // namespace parest
