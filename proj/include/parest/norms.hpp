#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "parest/timestepping.hpp"

namespace parest {

/// Test space for dual norms: H^{-1} norms are evaluated as sup over this
/// finite-dimensional space, i.e. sqrt(l^T A^{-1} l) with A its stiffness matrix.
/// Trial coefficients are mapped into the lift space by an exact prolongation.
class RieszLiftContext {
 public:
  /// Lift space equal to the trial space, or a nested refinement of it.
  RieszLiftContext(SpacePtr trial, SpacePtr lift, int refinement_level = 1);
  /// Context for operator-only problems (e.g. a single Fourier mode with M = 1, A = lambda).
  RieszLiftContext(std::shared_ptr<const SymmetricOperator> mass, std::shared_ptr<const SymmetricOperator> stiffness,
                   SparseMatrix prolongation, int refinement_level = 1);

  /// Lift space equal to the space the solution lives in.
  static RieszLiftContext for_solution(const TimeSlabSolution& sol);

  /// Same lift space and factorization, different (nested, coarser) trial space.
  RieszLiftContext with_trial(SpacePtr trial, SparseMatrix prolongation) const;

  const SpacePtr& trial_space() const { return trial_; }
  const SpacePtr& lift_space() const { return lift_; }
  const SymmetricOperator& mass() const { return *mass_; }
  const SymmetricOperator& stiffness() const { return *stiffness_; }
  const SparseMatrix& prolongation() const { return prolong_; }
  int refinement_level() const { return level_; }
  int dimension() const { return mass_->dimension(); }

  /// Riesz representative A^{-1} l.
  Vector riesz(const Vector& functional) const;
  double dual_norm_sq(const Vector& functional) const;

  Vector to_lift(const Vector& trial) const;
  SlabField to_lift(const SlabField& trial) const;

 private:
  SpacePtr trial_;
  SpacePtr lift_;
  std::shared_ptr<const SymmetricOperator> mass_;
  std::shared_ptr<const SymmetricOperator> stiffness_;
  std::shared_ptr<const SpdSolver> solver_;
  SparseMatrix prolong_;
  int level_ = 1;
};

/// Time-dependent functional on the lift space: either one vector per interval
/// (piecewise constant in time) or a callable evaluated at quadrature points.
class LoadHistory {
 public:
  static LoadHistory piecewise_constant(std::vector<Vector> per_interval);
  static LoadHistory function(std::function<Vector(int interval, double t)> fn, int points_per_interval = 8);
  static LoadHistory zero(int num_intervals, int dimension);

  bool is_piecewise_constant() const { return !fn_; }
  Vector at(int interval, double t) const;
  int points_per_interval() const { return points_; }

 private:
  std::vector<Vector> constant_;
  std::function<Vector(int, double)> fn_;
  int points_ = 2;
};

/// Loads of a source on the lift space. `mode` selects f(t) itself or its temporal mean on each interval.
enum class SourceSampling { pointwise, time_mean };
LoadHistory source_loads(const Source& f, const RieszLiftContext& ctx, const TimePartition& partition,
                         SourceSampling mode);
/// Loads of the discrete data f_{h,tau} carried by a solution, on the lift space.
LoadHistory discrete_loads(const TimeSlabSolution& sol, const RieszLiftContext& ctx);

enum class NormKind { X, Y, Y_T, Y_star, energy };
const char* norm_name(NormKind kind);

double dual_norm(const Vector& functional, const RieszLiftContext& ctx);
/// L2-in-time aggregate of per-interval constant functionals.
double dual_norm(const std::vector<Vector>& per_interval, const TimePartition& partition, const RieszLiftContext& ctx);

/// Squared-norm components of a slab field in lift coordinates.
struct NormParts {
  double dt_dual_sq = 0.0;  // int ||d_t v||_{-1}^2
  double grad_sq = 0.0;     // int ||grad v||^2
  double initial_sq = 0.0;  // ||v(0)||^2
  double final_sq = 0.0;    // ||v(T)||^2
};

/// Norm components of a field already in lift coordinates; per-interval contributions when requested.
NormParts norm_parts(const SlabField& lifted, const RieszLiftContext& ctx, std::vector<NormParts>* per_interval = nullptr);

double combine(const NormParts& parts, NormKind kind);

double spacetime_norm(const SpaceTimeFunction& v, NormKind kind, const RieszLiftContext& ctx);
/// Norm of a slab field given in trial coordinates; Y-type kinds require continuity.
double spacetime_norm(const SlabField& v, NormKind kind, const RieszLiftContext& ctx);

double ys_identity_residual(const SpaceTimeFunction& v, const RieszLiftContext& ctx);
double infsup_identity_residual(const SpaceTimeFunction& v, const RieszLiftContext& ctx);

/// Dual norm over L2(0,T;H^1_0) of v -> int <f,v> - (d_t U, v) - (grad W, grad v) with W = U
/// unless a separate diffusion argument is given (W = u_{h,tau} recovers the scheme's own residual).
double residual_dual_norm_Y(const SpaceTimeFunction& candidate, const LoadHistory& data, const RieszLiftContext& ctx,
                            const SpaceTimeFunction* diffusion_argument = nullptr);

struct BackwardRepresenter {
  SpaceTimeFunction phi;  // lift coordinates
  double pairing = 0.0;   // B_X(v, phi)
  double yt_norm = 0.0;   // ||phi||_{Y_T}
  double ratio = 0.0;     // pairing / yt_norm, a lower bound for ||v||_X
};

BackwardRepresenter backward_representer(const SpaceTimeFunction& v, const RieszLiftContext& ctx);

}  // namespace parest
