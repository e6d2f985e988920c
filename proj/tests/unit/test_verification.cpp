#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "parest/errors.hpp"
#include "parest/verification.hpp"

using namespace parest;
using std::numbers::pi;

namespace {

PartitionPtr uniform(double T, int N) { return std::make_shared<TimePartition>(TimePartition::uniform(T, N)); }

TimeSlabSolution run(const ManufacturedProblem& problem, int cells, int p, int steps, double T = 1.0) {
  auto space = std::make_shared<ScalarSpace>(problem.mesh(cells), p);
  auto partition = uniform(T, steps);
  const auto data = time_mean_rhs(*problem.source(), *partition, *space);
  return implicit_euler_run(space, partition, data, initial_datum(*space, problem.initial()));
}

}  // namespace

TEST(Manufactured, PureDecayModeHasZeroForcing) {
  const auto p = manufactured({ManufacturedKind::fourier_1d, 1, 1, pi * pi});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(p.f(Point(unit(rng), 0.0), unit(rng)), 0.0);
}

TEST(Manufactured, StationaryModeAndPolynomial) {
  const auto s = manufactured({ManufacturedKind::fourier_1d, 1, 1, 0.0});
  const auto q = manufactured({ManufacturedKind::polynomial_in_time, 1, 1, 0.0});
  for (double x : {0.1, 0.37, 0.8})
    for (double t : {0.0, 0.4, 1.0}) {
      const Point pt(x, 0.0);
      EXPECT_NEAR(s.u(pt, t), std::sin(pi * x), 1e-15);
      EXPECT_NEAR(s.f(pt, t), pi * pi * std::sin(pi * x), 1e-13);
      EXPECT_NEAR(q.f(pt, t), x * (1.0 - x) + 2.0 * t, 1e-15);
      EXPECT_NEAR(q.u_t(pt, t), x * (1.0 - x), 1e-15);
    }
}

TEST(Manufactured, FiniteDifferenceConsistency) {
  for (const ManufacturedSpec& spec :
       {ManufacturedSpec{ManufacturedKind::fourier_1d, 1, 1, pi * pi}, ManufacturedSpec{ManufacturedKind::fourier_1d, 3, 1, 2.0},
        ManufacturedSpec{ManufacturedKind::fourier_2d, 1, 2, 5.0},
        ManufacturedSpec{ManufacturedKind::polynomial_in_time, 1, 1, 0.0}})
    EXPECT_LT(manufactured_consistency(spec), 1e-6);
  // A deliberately wrong forcing is caught.
  ManufacturedSpec bad{ManufacturedKind::fourier_1d, 1, 1, 1.0};
  auto wrong = [&](long double x, long double t) {
    return manufactured_f<long double>(bad, x, 0.0L, t) * 1.01L;
  };
  long double worst = 0.0L;
  for (long double x : {0.3L, 0.6L}) {
    const long double h = 1e-5L;
    auto u = [&](long double a, long double c) { return manufactured_u<long double>(bad, a, 0.0L, c); };
    const long double ut = (u(x, 0.5L + h) - u(x, 0.5L - h)) / (2 * h);
    const long double lap = (u(x + h, 0.5L) - 2 * u(x, 0.5L) + u(x - h, 0.5L)) / (h * h);
    worst = std::max(worst, std::abs(ut - lap - wrong(x, 0.5L)));
  }
  EXPECT_GT(worst, 1e-3L);
}

TEST(Manufactured, GradientMatchesFiniteDifferences) {
  const auto p = manufactured({ManufacturedKind::fourier_2d, 2, 1, 3.0});
  const Point x(0.3, 0.7);
  const double h = 1e-6;
  const Point g = p.grad_u(x, 0.2);
  EXPECT_NEAR(g[0], (p.u(x + Point(h, 0), 0.2) - p.u(x - Point(h, 0), 0.2)) / (2 * h), 1e-7);
  EXPECT_NEAR(g[1], (p.u(x + Point(0, h), 0.2) - p.u(x - Point(0, h), 0.2)) / (2 * h), 1e-7);
}

TEST(Manufactured, InvalidModeRejected) {
  EXPECT_THROW(manufactured({ManufacturedKind::fourier_1d, 0, 1, 0.0}), InvalidArgument);
  EXPECT_THROW(manufactured({ManufacturedKind::fourier_2d, 1, 0, 0.0}), InvalidArgument);
}

TEST(Reference, RefinementShapesAndGuards) {
  const auto problem = manufactured({ManufacturedKind::fourier_1d, 1, 1, pi * pi});
  const auto coarse = run(problem, 4, 1, 4);
  const auto ref = reference_solve(problem, coarse, {2, 2});
  EXPECT_EQ(ref.solution.space->mesh().num_cells(), 8);
  EXPECT_EQ(ref.solution.num_intervals(), 8);
  EXPECT_THROW(reference_solve(problem, coarse, {1, 2}), RefinementError);
  ReferenceOptions capped{4, 4};
  capped.max_dofs = 100;
  EXPECT_THROW(reference_solve(problem, coarse, capped), RefinementError);
}

TEST(Reference, ZeroDataGivesZeroReference) {
  auto space = std::make_shared<ScalarSpace>(build_structured_triangle_mesh(3, 3, {0, 1, 0, 1}), 1);
  auto partition = uniform(1.0, 2);
  const auto data = time_mean_rhs(*zero_source(), *partition, *space);
  const auto coarse = implicit_euler_run(space, partition, data, Vector::Zero(space->dimension()));
  const auto ref = reference_solve(coarse, {2, 3});
  for (const auto& v : ref.solution.nodes) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Reference, DiscreteDataIsCarriedExactly) {
  const auto problem = manufactured({ManufacturedKind::fourier_2d, 1, 1, 1.0});
  const auto coarse = run(problem, 3, 1, 2);
  const auto ref = reference_solve(coarse, {2, 2});
  const auto& fine_mesh = ref.solution.space->mesh();
  const auto parent = parent_cells(coarse.space->mesh_ptr(), fine_mesh);
  for (int i = 0; i < 4; ++i)
    for (int K = 0; K < fine_mesh.num_cells(); K += 5) {
      const Point x = fine_mesh.geometry(K).map(Point(0.2, 0.3));
      EXPECT_NEAR(ref.solution.source[i].value_at(K, x), coarse.source[i / 2].value_at(parent[K], x), 1e-12);
    }
  const Vector u0 = ref.prolongation * coarse.nodes[0];
  EXPECT_LT((ref.solution.nodes[0] - u0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reference, FinalErrorDecreasesWithRefinement) {
  const auto problem = manufactured({ManufacturedKind::fourier_1d, 1, 1, pi * pi});
  const auto coarse = run(problem, 8, 1, 4, 0.2);
  auto final_error = [&](const ReferenceSolution& ref) {
    const auto& space = *ref.solution.space;
    const Vector full = space.expand(ref.solution.nodes.back());
    double worst = 0.0;
    for (int i = 0; i < space.num_dofs(); ++i)
      worst = std::max(worst, std::abs(full[i] - problem.u(space.dof_point(i), 0.2)));
    return worst;
  };
  const double e2 = final_error(reference_solve(problem, coarse, {2, 2}));
  const double e4 = final_error(reference_solve(problem, coarse, {4, 4}));
  EXPECT_LT(e4, 0.6 * e2);
}

TEST(ExactError, InterpolantOfRepresentableSolutionHasZeroError) {
  const auto problem = manufactured({ManufacturedKind::polynomial_in_time, 1, 1, 0.0});
  auto space = std::make_shared<const ScalarSpace>(problem.mesh(4), 2);
  auto partition = uniform(1.0, 3);
  std::vector<Vector> nodes;
  for (int n = 0; n <= 3; ++n) {
    const double t = partition->node(n);
    nodes.push_back(space->interpolate([&](const Point& x) { return problem.u(x, t); }));
  }
  const SpaceTimeFunction U(Profile::continuous_affine, partition, nodes, space);
  auto lift = std::make_shared<const ScalarSpace>(refine_uniform(space->mesh(), 2), 2);
  const RieszLiftContext ctx(space, lift, 2);
  for (NormKind k : {NormKind::X, NormKind::Y, NormKind::Y_star, NormKind::energy})
    EXPECT_LT(exact_error(problem, U, k, ctx), 1e-12) << norm_name(k);
  const SpaceTimeFunction u(Profile::constant_left_continuous, partition, nodes, space);
  EXPECT_GT(exact_error(problem, u, NormKind::X, ctx), 1e-3);
  EXPECT_THROW(exact_error(problem, u, NormKind::Y, ctx), ProfileMismatch);
}

TEST(ExactError, ModalSingleStepClosedForm) {
  const auto sol = modal_solve({1.0, 1.0, 1.0, nullptr});
  const double closed = 0.25 - (1.0 - std::exp(-1.0)) + 0.5 * (1.0 - std::exp(-2.0));
  EXPECT_NEAR(modal_error_sq(sol, Profile::constant_left_continuous), closed, 1e-12);
  // U(t) = t/2: int ((1 - e^-t) - t/2)^2 dt
  const double e1 = std::exp(-1.0), e2 = std::exp(-2.0);
  const double closed_U = 1.0 - 2.0 * (1.0 - e1) + 0.5 * (1.0 - e2) - 0.5 + (1.0 - 2.0 * e1) + 1.0 / 12.0;
  EXPECT_NEAR(modal_error_sq(sol, Profile::continuous_affine), closed_U, 1e-12);
}

TEST(ExactError, QuadratureIsConverged) {
  const auto problem = manufactured({ManufacturedKind::fourier_1d, 1, 1, pi * pi});
  const auto sol = run(problem, 16, 1, 8, 0.1);
  auto lift = std::make_shared<const ScalarSpace>(refine_uniform(sol.space->mesh(), 2), 1);
  const RieszLiftContext ctx(sol.space, lift, 2);
  const auto U = reconstruct(sol, Profile::continuous_affine);
  for (NormKind k : {NormKind::X, NormKind::Y, NormKind::energy}) {
    const double a = exact_error(problem, U, k, ctx, {6, 6});
    const double b = exact_error(problem, U, k, ctx, {9, 10});
    EXPECT_LT(std::abs(a - b), 1e-10) << norm_name(k);
  }
}

TEST(ExactError, ReferenceErrorApproachesExactError) {
  const auto problem = manufactured({ManufacturedKind::fourier_1d, 1, 1, pi * pi});
  const auto sol = run(problem, 8, 1, 4, 0.1);
  const auto U = reconstruct(sol, Profile::continuous_affine);
  const auto ref = reference_solve(problem, sol, {8, 8});
  const RieszLiftContext ctx(sol.space, ref.solution.space, 8);
  for (NormKind k : {NormKind::X, NormKind::energy}) {
    const double exact = exact_error(problem, U, k, ctx);
    EXPECT_NEAR(reference_error(ref, U, k), exact, 0.2 * exact) << norm_name(k);
  }
}
