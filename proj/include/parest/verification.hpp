#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "parest/norms.hpp"

namespace parest {

enum class ManufacturedKind { fourier_1d, fourier_2d, polynomial_in_time };

struct ManufacturedSpec {
  ManufacturedKind kind = ManufacturedKind::fourier_1d;
  int kx = 1;
  int ky = 1;
  double decay = 0.0;
};

/// Closed forms, templated so the consistency check can run in extended precision.
template <class T>
T manufactured_u(const ManufacturedSpec& s, T x, T y, T t) {
  const T pi = std::numbers::pi_v<T>;
  switch (s.kind) {
    case ManufacturedKind::fourier_1d: return std::sin(s.kx * pi * x) * std::exp(-T(s.decay) * t);
    case ManufacturedKind::fourier_2d:
      return std::sin(s.kx * pi * x) * std::sin(s.ky * pi * y) * std::exp(-T(s.decay) * t);
    case ManufacturedKind::polynomial_in_time: return t * x * (T(1) - x);
  }
  return T(0);
}

template <class T>
T manufactured_f(const ManufacturedSpec& s, T x, T y, T t) {
  const T pi = std::numbers::pi_v<T>;
  switch (s.kind) {
    case ManufacturedKind::fourier_1d: return (s.kx * s.kx * pi * pi - T(s.decay)) * manufactured_u(s, x, y, t);
    case ManufacturedKind::fourier_2d:
      return ((s.kx * s.kx + s.ky * s.ky) * pi * pi - T(s.decay)) * manufactured_u(s, x, y, t);
    case ManufacturedKind::polynomial_in_time: return x * (T(1) - x) + T(2) * t;
  }
  return T(0);
}

struct ManufacturedProblem {
  ManufacturedSpec spec;
  std::string name;
  int dim = 1;

  double u(const Point& x, double t) const { return manufactured_u<double>(spec, x[0], x[1], t); }
  double f(const Point& x, double t) const { return manufactured_f<double>(spec, x[0], x[1], t); }
  double u_t(const Point& x, double t) const;
  Point grad_u(const Point& x, double t) const;

  SourcePtr source() const;
  SpatialFunction initial() const;
  MeshPtr mesh(int cells_per_direction) const;
};

/// Throws InvalidArgument for mode indices below 1; runs the consistency check.
ManufacturedProblem manufactured(const ManufacturedSpec& spec);

/// Largest relative deviation between f and centred finite differences of u_t - Laplace(u),
/// evaluated in long double at random space-time points in the domain times (0,1).
double manufactured_consistency(const ManufacturedSpec& spec, int samples = 100, std::uint64_t seed = 20240607,
                                double step = 1e-5);

struct ReferenceOptions {
  int space_refine = 2;
  int time_refine = 2;
  long long max_dofs = 4'000'000;  // cap on (spatial dofs) x (time steps)
  Execution exec = Execution::parallel;
};

/// Implicit Euler on a nested refinement of a coarse run.
struct ReferenceSolution {
  TimeSlabSolution solution;
  SpacePtr coarse_space;
  PartitionPtr coarse_partition;
  SparseMatrix prolongation;  // coarse free dofs -> reference free dofs
  int space_ratio = 1;
  int time_ratio = 1;
  std::shared_ptr<const RieszLiftContext> context;  // lift space = reference space

  /// A coarse space-time function expressed on the reference space and partition.
  SlabField embed(const SpaceTimeFunction& coarse) const;
  /// Lift context on the reference space whose trial space is the coarse space.
  RieszLiftContext coarse_context() const { return context->with_trial(coarse_space, prolongation); }
  /// The reference itself as a continuous affine field.
  SlabField field() const;
};

/// Reference for a manufactured problem, with its data treated exactly like the coarse run
/// (temporal means and L2-projected initial datum on the finer discretization).
ReferenceSolution reference_solve(const ManufacturedProblem& problem, const TimeSlabSolution& coarse,
                                  const ReferenceOptions& options);
/// Reference for the discrete data of a run: f = f_h,tau and u_0 = u_h,tau,0.
ReferenceSolution reference_solve(const TimeSlabSolution& coarse, const ReferenceOptions& options);

/// Squared norm components of (reference - embedded approximation), summed per coarse interval on request.
NormParts reference_error_parts(const ReferenceSolution& ref, const SpaceTimeFunction& approx,
                                std::vector<NormParts>* per_coarse_interval = nullptr);
double reference_error(const ReferenceSolution& ref, const SpaceTimeFunction& approx, NormKind kind);

/// Error against a manufactured solution by Gauss quadrature in space and time. The
/// H^{-1} part of Y-type norms uses the lift space of ctx.
struct ExactErrorOptions {
  int time_points = 6;
  int extra_space_degree = 6;
};
NormParts exact_error_parts(const ManufacturedProblem& problem, const SpaceTimeFunction& approx,
                            const RieszLiftContext& ctx, const ExactErrorOptions& options = {});
double exact_error(const ManufacturedProblem& problem, const SpaceTimeFunction& approx, NormKind kind,
                   const RieszLiftContext& ctx, const ExactErrorOptions& options = {});

/// int_0^T (u - v)^2 dt for a single-mode run, v the reconstruction of the given profile.
double modal_error_sq(const ModalSolution& sol, Profile profile, int points_per_interval = 12);

}  // namespace parest
