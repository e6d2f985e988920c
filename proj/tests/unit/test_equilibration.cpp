#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "parest/equilibration.hpp"
#include "parest/errors.hpp"
#include "parest/lagrange.hpp"
#include "parest/quadrature.hpp"

using namespace parest;
using std::numbers::pi;

namespace {

PartitionPtr uniform(double T, int N) { return std::make_shared<TimePartition>(TimePartition::uniform(T, N)); }

MeshPtr mesh_for(int dim, int n) {
  return dim == 1 ? build_interval_mesh(n, {0.0, 1.0}) : build_structured_triangle_mesh(n, n, {0.0, 1.0, 0.0, 1.0});
}

TimeSlabSolution heat_run(int dim, int n, int p, int steps) {
  auto space = std::make_shared<ScalarSpace>(mesh_for(dim, n), p);
  auto partition = uniform(0.5, steps);
  auto f = make_source([](const Point& x, double t) {
    return (1.0 + std::sin(4.0 * t)) * std::exp(x[0]) * (1.0 + x[1] * x[1]) + 2.0 * t;
  });
  const auto data = time_mean_rhs(*f, *partition, *space);
  const Vector u0 = initial_datum(*space, [](const Point& x) { return std::sin(pi * x[0]) * (1.0 + x[1]); });
  return implicit_euler_run(space, partition, data, u0);
}

PatchPolynomial zero_poly(int dim, int degree, const VertexPatch& patch) {
  PatchPolynomial g;
  g.dim = dim;
  g.degree = degree;
  g.cells = patch.cells;
  g.coeffs = Matrix::Zero(lagrange_basis(dim, degree).size(), static_cast<Eigen::Index>(patch.cells.size()));
  return g;
}

/// Nodal interpolation of fn(cell, xi) into a patch polynomial (exact for polynomials of that degree).
template <class F>
PatchPolynomial interpolate_poly(int dim, int degree, const VertexPatch& patch, F&& fn) {
  auto g = zero_poly(dim, degree, patch);
  const auto& basis = lagrange_basis(dim, degree);
  for (size_t j = 0; j < patch.cells.size(); ++j)
    for (int i = 0; i < basis.size(); ++i) g.coeffs(i, static_cast<Eigen::Index>(j)) = fn(patch.cells[j], basis.node(i));
  return g;
}

const VertexPatch& first_interior(const std::vector<VertexPatch>& patches) {
  for (const auto& p : patches)
    if (p.is_interior) return p;
  throw std::logic_error("no interior patch");
}

}  // namespace

TEST(RTN, NormalTraceContinuousForRandomCoefficients) {
  for (int k : {0, 1, 2, 3}) {
    auto mesh = mesh_for(2, 3);
    const RTNSpace space(mesh, k);
    EXPECT_EQ(space.local_size(), (k + 1) * (k + 3));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector c(space.num_dofs());
    for (auto& x : c) x = dist(rng);
    EXPECT_LT(max_normal_jump(space, c), 1e-11) << "k=" << k;
  }
  const RTNSpace line(mesh_for(1, 5), 2);
  Vector c = Vector::LinSpaced(line.num_dofs(), -1.0, 2.0);
  EXPECT_LT(max_normal_jump(line, c), 1e-12);
}

TEST(RTN, FaceBasisCarriesUnitMeanFlux) {
  // Divergence theorem: the lowest face moment of a face basis function is its mean
  // normal flux, every other dof vanishes.
  auto mesh = mesh_for(2, 2);
  for (int k : {0, 2}) {
    const RTNSpace space(mesh, k);
    const auto& rule = cached_simplex_rule(2, 2 * k + 2);
    for (int K = 0; K < mesh->num_cells(); ++K) {
      const auto& g = mesh->geometry(K);
      Vector total = Vector::Zero(space.local_size());
      Matrix v;
      Vector d;
      for (int q = 0; q < rule.size(); ++q) {
        space.evaluate(K, rule.points[q], v, d);
        total += rule.weights[q] * g.det * d;
      }
      Point centroid = Point::Zero();
      for (int i = 0; i < 3; ++i) centroid += mesh->vertex(mesh->cell(K)[i]) / 3.0;
      for (int f = 0; f < 3; ++f) {
        const int face = mesh->cell_face(K, f);
        const Point mid = space.face_point(face, 0.5);
        const double sign = (mid - centroid).dot(mesh->face_normal(face)) > 0 ? 1.0 : -1.0;
        for (int j = 0; j <= k; ++j) {
          const double expected = j == 0 ? sign * mesh->face_measure(face) : 0.0;
          EXPECT_NEAR(total[f * (k + 1) + j], expected, 1e-12);
        }
      }
      for (int i = 3 * (k + 1); i < space.local_size(); ++i) EXPECT_NEAR(total[i], 0.0, 1e-12);
    }
  }
}

TEST(SolvePatch, ZeroDataGivesZeroFlux) {
  auto mesh = mesh_for(2, 3);
  auto space = std::make_shared<const RTNSpace>(mesh, 2);
  for (const auto& patch : vertex_patches(*mesh)) {
    auto g = zero_poly(2, 2, patch);
    PatchVectorPolynomial t{zero_poly(2, 1, patch), zero_poly(2, 1, patch)};
    const auto flux = solve_patch(space, patch, g, t);
    EXPECT_EQ(flux.coeffs.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(flux.objective, 0.0);
  }
}

TEST(SolvePatch, FeasibleTargetIsRecovered) {
  auto mesh = mesh_for(2, 3);
  const int k = 2;
  auto space = std::make_shared<const RTNSpace>(mesh, k);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (const auto& patch : vertex_patches(*mesh)) {
    const PatchSolver solver(space, patch);
    Vector v0 = Vector::Zero(space->num_dofs());
    for (int d : solver.dofs()) v0[d] = dist(rng);
    auto g = interpolate_poly(2, k, patch, [&](int K, const Point& xi) { return space->divergence(v0, K, xi); });
    PatchVectorPolynomial t{
        interpolate_poly(2, k + 1, patch, [&](int K, const Point& xi) { return -space->value(v0, K, xi)[0]; }),
        interpolate_poly(2, k + 1, patch, [&](int K, const Point& xi) { return -space->value(v0, K, xi)[1]; })};
    const auto flux = solver.solve(g, t);
    EXPECT_LT(flux.objective, 1e-10);
    EXPECT_LT((flux.global(space->num_dofs()) - v0).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SolvePatch, MatchesDenseNullSpaceQuadraticProgram) {
  // Two-cell interior patch on [0,1] around x = 1/2, P3 fluxes, P2 multipliers.
  auto mesh = build_interval_mesh(2, {0.0, 1.0});
  const auto patches = vertex_patches(*mesh);
  const auto& patch = first_interior(patches);
  ASSERT_EQ(patch.cells.size(), 2u);
  auto space = std::make_shared<const RTNSpace>(mesh, 2);
  auto phys = [&](int K, const Point& xi) { return mesh->geometry(K).map(xi)[0]; };
  auto gfn = [](double x) { return x - 0.5; };
  auto tfn = [](double x) { return x * x + 0.1; };
  auto g = interpolate_poly(1, 2, patch, [&](int K, const Point& xi) { return gfn(phys(K, xi)); });
  PatchVectorPolynomial t{interpolate_poly(1, 2, patch, [&](int K, const Point& xi) { return tfn(phys(K, xi)); }),
                          zero_poly(1, 2, patch)};
  const auto flux = solve_patch(space, patch, g, t);

  // Oracle: cubic monomials per cell, constraints written out by hand.
  const auto gl = gauss_legendre(8);
  const double cells[2][2] = {{0.0, 0.5}, {0.5, 1.0}};
  auto integrate = [&](int c, auto&& fn) {
    double s = 0.0;
    for (int q = 0; q < gl.size(); ++q) {
      const double x = cells[c][0] + gl.points[q][0] * (cells[c][1] - cells[c][0]);
      s += gl.weights[q] * (cells[c][1] - cells[c][0]) * fn(x);
    }
    return s;
  };
  Matrix C = Matrix::Zero(9, 8);
  Vector d = Vector::Zero(9);
  for (int a = 0; a < 4; ++a) {
    C(0, a) = std::pow(0.0, a);
    C(1, 4 + a) = std::pow(1.0, a);
    C(2, a) = std::pow(0.5, a);
    C(2, 4 + a) = -std::pow(0.5, a);
  }
  for (int c = 0; c < 2; ++c)
    for (int m = 0; m < 3; ++m) {
      const int row = 3 + 3 * c + m;
      for (int a = 1; a < 4; ++a) C(row, 4 * c + a) = integrate(c, [&](double x) { return a * std::pow(x, a - 1 + m); });
      d[row] = integrate(c, [&](double x) { return gfn(x) * std::pow(x, m); });
    }
  Matrix Q = Matrix::Zero(8, 8);
  Vector r = Vector::Zero(8);
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 4; ++a) {
      r[4 * c + a] = integrate(c, [&](double x) { return std::pow(x, a) * tfn(x); });
      for (int b = 0; b < 4; ++b) Q(4 * c + a, 4 * c + b) = integrate(c, [&](double x) { return std::pow(x, a + b); });
    }
  const Vector particular = C.completeOrthogonalDecomposition().solve(d);
  ASSERT_LT((C * particular - d).norm(), 1e-12);
  const Matrix Z = Eigen::FullPivLU<Matrix>(C).kernel();
  const Vector z = (Z.transpose() * Q * Z).ldlt().solve(-Z.transpose() * (Q * particular + r));
  const Vector oracle = particular + Z * z;

  const Vector sigma = flux.global(space->num_dofs());
  for (int c = 0; c < 2; ++c)
    for (double s : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      const double x = cells[c][0] + s * 0.5;
      double expect = 0.0;
      for (int a = 0; a < 4; ++a) expect += oracle[4 * c + a] * std::pow(x, a);
      EXPECT_NEAR(space->value(sigma, patch.cells[c], Point(s, 0.0))[0], expect, 1e-11);
    }
}

TEST(SolvePatch, IncompatibleSourceOnInteriorPatchThrows) {
  auto mesh = mesh_for(2, 3);
  auto space = std::make_shared<const RTNSpace>(mesh, 1);
  const auto patches = vertex_patches(*mesh);
  const auto& patch = first_interior(patches);
  auto g = interpolate_poly(2, 1, patch, [](int, const Point&) { return 1.0; });
  PatchVectorPolynomial t{zero_poly(2, 1, patch), zero_poly(2, 1, patch)};
  EXPECT_THROW(solve_patch(space, patch, g, t), CompatibilityError);
  for (const auto& p : patches)
    if (!p.is_interior) {
      auto gb = interpolate_poly(2, 1, p, [](int, const Point&) { return 1.0; });
      PatchVectorPolynomial tb{zero_poly(2, 1, p), zero_poly(2, 1, p)};
      EXPECT_NO_THROW(solve_patch(space, p, gb, tb));
    }
}

TEST(PatchSource, InteriorVerticesHaveZeroMean) {
  for (int dim : {1, 2}) {
    const auto sol = heat_run(dim, dim == 1 ? 8 : 4, 2, 3);
    const auto& mesh = sol.space->mesh();
    bool boundary_nonzero = false;
    for (const auto& patch : vertex_patches(mesh))
      for (int n = 0; n < 3; ++n) {
        const auto g = patch_source(sol, patch, n);
        EXPECT_EQ(g.degree, 3);
        double mean = 0.0, l1 = 0.0;
        const auto& rule = cached_simplex_rule(dim, 8);
        for (size_t j = 0; j < patch.cells.size(); ++j)
          for (int q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * mesh.geometry(patch.cells[j]).det;
            const double v = g.value(static_cast<int>(j), rule.points[q]);
            mean += w * v;
            l1 += w * std::abs(v);
          }
        if (patch.is_interior) {
          EXPECT_LE(std::abs(mean), 1e-11 * l1);
        } else if (std::abs(mean) > 1e-6 * l1) {
          boundary_nonzero = true;
        }
      }
    EXPECT_TRUE(boundary_nonzero);
  }
}

TEST(AssembleFlux, EquilibrationIdentityAndConformity) {
  for (int dim : {1, 2})
    for (int p : {1, 2}) {
      const auto sol = heat_run(dim, dim == 1 ? 16 : 8, p, 8);
      const auto flux = assemble_flux(sol, p + 1);
      EXPECT_LE(equilibration_residual(flux, sol), 1e-9) << dim << " " << p;
      EXPECT_LE(flux.max_constraint_residual, 1e-10);
      EXPECT_LE(flux.max_kkt_residual, 1e-10);
      for (const auto& c : flux.coeffs) EXPECT_LT(max_normal_jump(*flux.space, c), 1e-10);
    }
}

TEST(AssembleFlux, PatchFluxHasZeroTraceOnPatchBoundary) {
  const auto sol = heat_run(2, 4, 1, 2);
  const auto& mesh = sol.space->mesh();
  auto space = std::make_shared<const RTNSpace>(sol.space->mesh_ptr(), 2);
  const auto gl = gauss_legendre(4);
  for (const auto& patch : vertex_patches(mesh)) {
    const auto pf = solve_patch(space, patch, patch_source(sol, patch, 1), patch_target(sol, patch, 1));
    const Vector s = pf.global(space->num_dofs());
    for (int K : patch.cells)
      for (int f = 0; f < 3; ++f) {
        const int face = mesh.cell_face(K, f);
        const auto& fc = mesh.face_cells(face);
        const int other = fc[0] == K ? fc[1] : fc[0];
        const bool inside = other >= 0 && std::count(patch.cells.begin(), patch.cells.end(), other) > 0;
        if (inside || (!patch.is_interior && mesh.is_boundary_face(face))) continue;
        for (int q = 0; q < gl.size(); ++q) {
          const Point x = space->face_point(face, gl.points[q][0]);
          const Point v = space->value(s, K, mesh.geometry(K).to_reference(x));
          EXPECT_NEAR(v.dot(mesh.face_normal(face)), 0.0, 1e-11);
        }
      }
  }
}

TEST(AssembleFlux, ZeroDataGivesZeroFlux) {
  auto space = std::make_shared<ScalarSpace>(mesh_for(2, 3), 1);
  auto partition = uniform(1.0, 2);
  const auto data = time_mean_rhs(*zero_source(), *partition, *space);
  const auto sol = implicit_euler_run(space, partition, data, Vector::Zero(space->dimension()));
  const auto flux = assemble_flux(sol, 2);
  for (const auto& c : flux.coeffs) EXPECT_EQ(c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleFlux, SerialAndParallelAreBitwiseEqual) {
  const auto sol = heat_run(2, 6, 2, 3);
  const auto a = assemble_flux(sol, 3, Execution::serial);
  const auto b = assemble_flux(sol, 3, Execution::parallel);
  for (int n = 0; n < 3; ++n) EXPECT_TRUE(a.coeffs[n] == b.coeffs[n]);
}

TEST(AssembleFlux, ObjectiveDoesNotIncreaseWithFluxDegree) {
  const auto sol = heat_run(2, 4, 1, 2);
  const auto& mesh = sol.space->mesh();
  for (const auto& patch : vertex_patches(mesh)) {
    double previous = INFINITY;
    for (int k : {2, 3, 4}) {
      auto space = std::make_shared<const RTNSpace>(sol.space->mesh_ptr(), k);
      const auto pf = solve_patch(space, patch, patch_source(sol, patch, 0, k), patch_target(sol, patch, 0));
      EXPECT_LE(pf.objective, previous * (1.0 + 1e-10));
      previous = pf.objective;
    }
  }
}

TEST(AssembleFlux, StationaryStateMatchesEllipticFlux) {
  const int p = 1;
  auto space = std::make_shared<ScalarSpace>(mesh_for(2, 4), p);
  auto partition = uniform(1.0, 3);
  auto f = make_source([](const Point& x, double) { return 1.0 + x[0] * x[1]; });
  const auto data = time_mean_rhs(*f, *partition, *space);
  const auto stiffness = assemble(*space, OperatorKind::stiffness);
  const Vector u0 = solve_spd(stiffness, data.loads[0]);
  const auto sol = implicit_euler_run(space, partition, data, u0);
  const auto flux = assemble_flux(sol, p + 1);

  // Elliptic patch problems with g = psi f - grad psi . grad u0.
  TimeSlabSolution elliptic = sol;
  elliptic.nodes.assign(sol.nodes.size(), u0);
  const auto reference = assemble_flux(elliptic, p + 1);
  const double scale = reference.coeffs[0].cwiseAbs().maxCoeff();
  for (int n = 0; n < 3; ++n) EXPECT_LT((flux.coeffs[n] - reference.coeffs[0]).cwiseAbs().maxCoeff(), 1e-11 * scale);
  EXPECT_LT((flux.coeffs[1] - flux.coeffs[2]).cwiseAbs().maxCoeff(), 1e-12 * scale);
}
