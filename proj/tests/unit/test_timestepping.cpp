#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "parest/errors.hpp"
#include "parest/timestepping.hpp"

using namespace parest;
using std::numbers::pi;

namespace {

SpacePtr unit_interval_space(int n, int p) {
  return std::make_shared<ScalarSpace>(build_interval_mesh(n, {0.0, 1.0}), p);
}

PartitionPtr uniform(double T, int N) { return std::make_shared<TimePartition>(TimePartition::uniform(T, N)); }

TimeSlabSolution heat_run(SpacePtr space, PartitionPtr partition) {
  auto f = make_source([](const Point& x, double t) { return std::sin(3.0 * t) * x[0] * (1.0 - x[0]) + 1.0; });
  const auto data = time_mean_rhs(*f, *partition, *space);
  const Vector u0 = initial_datum(*space, [](const Point& x) { return std::sin(pi * x[0]); });
  return implicit_euler_run(space, partition, data, u0);
}

}  // namespace

TEST(TimePartition, BasicsAndRefinement) {
  const auto p = TimePartition::uniform(2.0, 4);
  EXPECT_EQ(p.num_intervals(), 4);
  EXPECT_DOUBLE_EQ(p.step(2), 0.5);
  const auto r = p.refine(3);
  EXPECT_EQ(r.num_intervals(), 12);
  const auto parent = r.parents_in(p);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(parent[i], i / 3);
  EXPECT_THROW(p.parents_in(r), RefinementError);
  const auto g = TimePartition::graded(1.0, 4, 2.0);
  const auto rev = g.reversed();
  for (int n = 0; n <= 4; ++n) EXPECT_NEAR(rev.node(n), 1.0 - g.node(4 - n), 1e-15);
  EXPECT_EQ(p.interval_containing(0.5), 0);
  EXPECT_EQ(p.interval_containing(0.5000001), 1);
  EXPECT_THROW(TimePartition({0.0, 0.5, 0.5}), InvalidArgument);
}

TEST(TimeMean, ConstantInTimeDataIsUnchanged) {
  auto space = unit_interval_space(6, 2);
  auto partition = uniform(1.0, 3);
  auto fx = [](const Point& x) { return std::cos(2.0 * x[0]); };
  auto f = make_source([&](const Point& x, double) { return fx(x); });
  const auto data = time_mean_rhs(*f, *partition, *space);
  const CellField direct = CellField::project(space->mesh_ptr(), 2, fx, 10);
  for (const auto& field : data.fields)
    EXPECT_LT((field.coefficients() - direct.coefficients()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TimeMean, LinearAndSineMeans) {
  auto space = unit_interval_space(2, 1);
  auto lin = make_source([](const Point&, double t) { return t; });
  const auto d1 = time_mean_rhs(*lin, *uniform(1.0, 1), *space);
  EXPECT_NEAR(d1.fields[0].coefficients().maxCoeff(), 0.5, 1e-15);
  EXPECT_NEAR(d1.fields[0].coefficients().minCoeff(), 0.5, 1e-15);

  auto sine = make_source([](const Point&, double t) { return std::sin(t); });
  const auto d2 = time_mean_rhs(*sine, *uniform(pi, 1), *space);
  EXPECT_NEAR(d2.fields[0].coefficients().maxCoeff(), 2.0 / pi, 1e-14);
}

TEST(ImplicitEuler, ZeroDataGivesZero) {
  auto space = unit_interval_space(5, 2);
  auto partition = uniform(1.0, 4);
  const auto data = time_mean_rhs(*zero_source(), *partition, *space);
  const auto sol = implicit_euler_run(space, partition, data, Vector::Zero(space->dimension()));
  for (const auto& u : sol.nodes) EXPECT_EQ(u.norm(), 0.0);
}

TEST(ImplicitEuler, SingleModeStep) {
  for (double lambda : {0.5, 1.0, 10.0}) {
    const auto m = modal_solve({lambda, 1.0, 1.0, uniform(1.0, 1)});
    EXPECT_NEAR(m.discrete.nodes[1][0], 1.0 / (1.0 + lambda), 1e-15);
  }
  EXPECT_DOUBLE_EQ(modal_solve({1.0, 1.0, 1.0, uniform(1.0, 1)}).discrete.nodes[1][0], 0.5);
  EXPECT_LT(modal_solve({1e8, 1.0, 1.0, uniform(1.0, 1)}).discrete.nodes[1][0], 1e-7);
  const auto m = modal_solve({2.0, 1.0, 1.0, uniform(1.0, 1)});
  EXPECT_NEAR(m.exact(0.7), (1.0 - std::exp(-1.4)) / 2.0, 1e-15);
}

TEST(ImplicitEuler, StationaryDataIsAFixedPoint) {
  auto space = std::make_shared<ScalarSpace>(build_structured_triangle_mesh(4, 4, {0, 1, 0, 1}), 2);
  auto partition = uniform(1.0, 5);
  auto f = make_source([](const Point& x, double) { return 1.0 + x[0] * x[1]; });
  const auto data = time_mean_rhs(*f, *partition, *space);
  const Vector u0 = solve_spd(assemble(*space, OperatorKind::stiffness), data.loads[0]);
  const auto sol = implicit_euler_run(space, partition, data, u0);
  for (const auto& u : sol.nodes) EXPECT_LT((u - u0).norm(), 1e-12 * u0.norm());
}

TEST(ImplicitEuler, StepResidualAndVariationalForm) {
  auto space = unit_interval_space(16, 2);
  auto partition = std::make_shared<TimePartition>(TimePartition::graded(1.0, 7, 1.5));
  const auto sol = heat_run(space, partition);
  EXPECT_LE(sol.max_step_residual, 1e-12);
  for (int i = 0; i < sol.num_intervals(); ++i) {
    const double tau = partition->step(i);
    const Vector residual =
        sol.mass->apply((sol.nodes[i + 1] - sol.nodes[i]) / tau) + sol.stiffness->apply(sol.nodes[i + 1]) - sol.loads[i];
    EXPECT_LE(residual.norm(), 1e-11 * sol.loads[i].norm());
  }
}

TEST(Reconstruct, ProfilesCoincideForConstantNodes) {
  auto partition = uniform(1.0, 3);
  std::vector<Vector> nodes(4, Vector::Constant(2, 1.5));
  for (auto profile : {Profile::constant_left_continuous, Profile::continuous_affine, Profile::average}) {
    const SpaceTimeFunction f(profile, partition, nodes);
    for (double t : {0.0, 0.1, 0.5, 0.99, 1.0}) EXPECT_EQ((f.value(t) - nodes[0]).norm(), 0.0);
  }
}

TEST(Reconstruct, SingleModeProfiles) {
  const auto m = modal_solve({1.0, 1.0, 1.0, uniform(1.0, 1)});
  const auto U = reconstruct(m.discrete, Profile::continuous_affine);
  const auto u = reconstruct(m.discrete, Profile::constant_left_continuous);
  for (double t : {0.1, 0.3, 0.75, 1.0}) {
    EXPECT_NEAR(U.value(t)[0], t / 2.0, 1e-15);
    EXPECT_NEAR(u.value(t)[0], 0.5, 1e-15);
  }
}

TEST(Reconstruct, AverageProfileValues) {
  auto space = unit_interval_space(5, 1);
  auto partition = uniform(1.0, 4);
  const auto sol = heat_run(space, partition);
  const auto avg = reconstruct(sol, Profile::average);
  for (int i = 0; i < 4; ++i) {
    const double tn = partition->node(i + 1), mid = tn - 0.5 * partition->step(i);
    EXPECT_LT((avg.value(tn) - sol.nodes[i + 1]).norm(), 1e-15);
    EXPECT_LT((avg.value(mid) - (3.0 * sol.nodes[i + 1] + sol.nodes[i]) / 4.0).norm(), 1e-14);
  }
}

TEST(Reconstruct, NodeAgreementAndJumpIdentity) {
  auto space = unit_interval_space(8, 2);
  auto partition = std::make_shared<TimePartition>(TimePartition::graded(0.5, 6, 2.0));
  const auto sol = heat_run(space, partition);
  const auto u = reconstruct(sol, Profile::constant_left_continuous);
  const auto U = reconstruct(sol, Profile::continuous_affine);
  for (int n = 0; n <= 6; ++n) {
    const double t = partition->node(n);
    EXPECT_TRUE((u.value(t).array() == sol.nodes[n].array()).all());
    EXPECT_TRUE((U.value(t).array() == sol.nodes[n].array()).all());
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 1; j <= 5; ++j) {
      const double t = j == 5 ? partition->node(i + 1) : partition->node(i) + partition->step(i) * j / 5.0;
      const Vector expected = (partition->node(i + 1) - t) / partition->step(i) * (sol.nodes[i + 1] - sol.nodes[i]);
      EXPECT_LT((u.value(t) - U.value(t) - expected).lpNorm<Eigen::Infinity>(), 1e-13);
    }
}

TEST(TemporalInterpolant, FixesAffineAndMapsPiecewiseConstantToAffine) {
  auto space = unit_interval_space(6, 1);
  auto partition = uniform(1.0, 5);
  const auto sol = heat_run(space, partition);
  const auto U = reconstruct(sol, Profile::continuous_affine);
  const auto u = reconstruct(sol, Profile::constant_left_continuous);
  const auto IU = temporal_interpolant(U);
  const auto Iu = temporal_interpolant(u);
  EXPECT_EQ(IU.profile(), Profile::continuous_affine);
  EXPECT_EQ(Iu.profile(), Profile::continuous_affine);
  for (int n = 0; n <= 5; ++n) {
    EXPECT_TRUE((IU.nodes()[n].array() == U.nodes()[n].array()).all());
    EXPECT_TRUE((Iu.nodes()[n].array() == U.nodes()[n].array()).all());
  }
  std::vector<Vector> constant(6, Vector::Constant(space->dimension(), 0.25));
  const auto c = temporal_interpolant(SpaceTimeFunction(Profile::constant_left_continuous, partition, constant));
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ((c.value(t) - constant[0]).norm(), 0.0);
}
