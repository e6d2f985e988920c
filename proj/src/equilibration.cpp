#include "parest/equilibration.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "parest/errors.hpp"
#include "parest/lagrange.hpp"
#include "parest/quadrature.hpp"

namespace parest {

namespace {

const Eigen::LDLT<Matrix>& reference_mass(int dim, int degree) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Eigen::LDLT<Matrix>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[dim * 64 + degree];
  if (!slot) {
    const auto& basis = lagrange_basis(dim, degree);
    const auto& rule = cached_simplex_rule(dim, 2 * degree);
    Matrix m = Matrix::Zero(basis.size(), basis.size());
    for (int q = 0; q < rule.size(); ++q) {
      const Vector v = basis.values(rule.points[q]);
      m += rule.weights[q] * v * v.transpose();
    }
    slot = std::make_unique<Eigen::LDLT<Matrix>>(m);
  }
  return *slot;
}

/// Local L2 projection of fn(xi) onto P_degree of the reference cell.
template <class F>
Vector project_local(int dim, int degree, int quad_degree, F&& fn) {
  const auto& basis = lagrange_basis(dim, degree);
  const auto& rule = cached_simplex_rule(dim, quad_degree);
  Vector rhs = Vector::Zero(basis.size());
  for (int q = 0; q < rule.size(); ++q) rhs += rule.weights[q] * fn(rule.points[q]) * basis.values(rule.points[q]);
  return reference_mass(dim, degree).solve(rhs);
}

/// Barycentric coordinate of local vertex i and its physical gradient.
double hat_value(int dim, int i, const Point& xi) {
  if (i == 0) return dim == 1 ? 1.0 - xi[0] : 1.0 - xi[0] - xi[1];
  return xi[i - 1];
}

Point hat_gradient(const CellGeometry& g, int dim, int i) {
  Point ref = Point::Zero();
  if (i == 0) {
    ref[0] = -1.0;
    if (dim == 2) ref[1] = -1.0;
  } else {
    ref[i - 1] = 1.0;
  }
  Point out = g.inverse_transpose * ref;
  if (dim == 1) out[1] = 0.0;
  return out;
}

int local_index(const SimplicialMesh& m, int cell, int vertex) {
  for (int i = 0; i < m.vertices_per_cell(); ++i)
    if (m.cell(cell)[i] == vertex) return i;
  throw InvalidArgument("vertex does not belong to cell");
}

void check_solution(const TimeSlabSolution& sol, int interval) {
  if (!sol.space) throw InvalidArgument("flux equilibration needs a finite element solution");
  if (interval < 0 || interval >= sol.num_intervals()) throw InvalidArgument("interval index out of range");
  if (static_cast<int>(sol.source.size()) != sol.num_intervals())
    throw InvalidArgument("flux equilibration needs the discrete source f_h,tau");
}

int source_degree(const TimeSlabSolution& sol) { return sol.source.empty() ? 0 : sol.source.front().degree(); }

}  // namespace

double PatchPolynomial::value(int j, const Point& xi) const {
  return lagrange_basis(dim, degree).values(xi).dot(coeffs.col(j));
}

Vector PatchFlux::global(int num_dofs) const {
  Vector out = Vector::Zero(num_dofs);
  for (size_t i = 0; i < dofs.size(); ++i) out[dofs[i]] = coeffs[static_cast<Eigen::Index>(i)];
  return out;
}

PatchSolver::PatchSolver(std::shared_ptr<const RTNSpace> space, const VertexPatch& patch)
    : space_(std::move(space)), patch_(patch) {
  const auto& m = space_->mesh();
  const int dim = m.dim();
  const int k = space_->order();
  const int nloc = space_->local_size();
  const auto& qbasis = lagrange_basis(dim, k);
  const int nq = qbasis.size();
  const int ncell = static_cast<int>(patch_.cells.size());

  // A face is constrained when it lies on the patch boundary and either the vertex is
  // interior or the face is not on the domain boundary.
  std::map<int, int> in_patch;
  for (int j = 0; j < ncell; ++j) in_patch[patch_.cells[j]] = j;
  std::map<int, int> patch_index;
  tables_.resize(ncell);
  const auto& rule = cached_simplex_rule(dim, 2 * k + 2);
  for (int j = 0; j < ncell; ++j) {
    const int K = patch_.cells[j];
    auto& t = tables_[j];
    t.local_to_patch.assign(nloc, -1);
    const auto dofs = space_->cell_dofs(K);
    for (int f = 0; f <= dim; ++f) {
      const int face = m.cell_face(K, f);
      const auto& fc = m.face_cells(face);
      const bool on_patch_boundary = m.is_boundary_face(face) || !in_patch.count(fc[0] == K ? fc[1] : fc[0]);
      const bool constrained = on_patch_boundary && (patch_.is_interior || !m.is_boundary_face(face));
      if (constrained) continue;
      for (int i = 0; i < space_->face_dofs(); ++i) {
        const int slot = f * space_->face_dofs() + i;
        auto [it, inserted] = patch_index.try_emplace(dofs[slot], static_cast<int>(patch_index.size()));
        t.local_to_patch[slot] = it->second;
      }
    }
    for (int i = (dim + 1) * space_->face_dofs(); i < nloc; ++i) {
      auto [it, inserted] = patch_index.try_emplace(dofs[i], static_cast<int>(patch_index.size()));
      t.local_to_patch[i] = it->second;
    }
    const auto& g = m.geometry(K);
    for (int q = 0; q < rule.size(); ++q) {
      Matrix v;
      Vector d;
      space_->evaluate(K, rule.points[q], v, d);
      t.points.push_back(rule.points[q]);
      t.weights.push_back(rule.weights[q] * g.det);
      t.values.push_back(std::move(v));
      t.divs.push_back(std::move(d));
    }
  }
  free_dofs_.assign(patch_index.size(), -1);
  for (const auto& [global, local] : patch_index) free_dofs_[local] = global;

  const int ns = static_cast<int>(free_dofs_.size());
  pressure_rows_ = static_cast<Eigen::Index>(nq) * ncell;
  pressure_values_.resize(rule.size(), nq);
  for (int q = 0; q < rule.size(); ++q) pressure_values_.row(q) = qbasis.values(rule.points[q]).transpose();

  mass_ = Matrix::Zero(ns, ns);
  b_ = Matrix::Zero(pressure_rows_, ns);
  Vector mean = Vector::Zero(pressure_rows_);
  for (int j = 0; j < ncell; ++j) {
    const auto& t = tables_[j];
    for (int q = 0; q < rule.size(); ++q) {
      const double w = t.weights[q];
      for (int a = 0; a < nloc; ++a) {
        const int pa = t.local_to_patch[a];
        if (pa < 0) continue;
        for (int b = 0; b < nloc; ++b) {
          const int pb = t.local_to_patch[b];
          if (pb < 0) continue;
          mass_(pa, pb) += w * t.values[q].col(a).dot(t.values[q].col(b));
        }
        for (int r = 0; r < nq; ++r) b_(j * nq + r, pa) += w * t.divs[q][a] * pressure_values_(q, r);
      }
      for (int r = 0; r < nq; ++r) mean[j * nq + r] += w * pressure_values_(q, r);
    }
  }
  mass_llt_.compute(mass_);
  if (mass_llt_.info() != Eigen::Success) throw AssemblyError("patch flux mass matrix is not positive definite");
  Matrix schur = b_ * mass_llt_.solve(b_.transpose());
  // Interior patches: divergence has a one-dimensional cokernel (constants); a rank-one
  // term fixes the multiplier to zero mean and leaves the flux unchanged.
  if (patch_.is_interior) schur += mean * mean.transpose();
  schur_llt_.compute(schur);
  if (schur_llt_.info() != Eigen::Success) throw AssemblyError("patch saddle-point system is singular");
  const Vector diag = Matrix(schur_llt_.matrixL()).diagonal();
  if (diag.minCoeff() <= 1e-8 * diag.maxCoeff()) throw AssemblyError("patch saddle-point system is singular");
}

PatchFlux PatchSolver::solve(const PatchPolynomial& g, const PatchVectorPolynomial& target) const {
  const auto& m = space_->mesh();
  const int dim = m.dim();
  const int nq = static_cast<int>(pressure_values_.cols());
  const int ncell = static_cast<int>(patch_.cells.size());
  const int ns = static_cast<int>(free_dofs_.size());
  if (static_cast<int>(g.coeffs.cols()) != ncell || static_cast<int>(target.x.coeffs.cols()) != ncell ||
      static_cast<int>(target.y.coeffs.cols()) != ncell)
    throw InvalidArgument("patch polynomial does not match the patch");

  const auto& gbasis = lagrange_basis(dim, g.degree);
  const auto& tbasis = lagrange_basis(dim, target.x.degree);
  // Data at quadrature points, reused for the diagnostics.
  std::vector<std::vector<double>> gval(ncell);
  std::vector<std::vector<Point>> tval(ncell);
  Vector rhs_f = Vector::Zero(ns);
  Vector rhs_g = Vector::Zero(pressure_rows_);
  double mean_g = 0.0, l1_g = 0.0, norm_g = 0.0;
  for (int j = 0; j < ncell; ++j) {
    const auto& t = tables_[j];
    for (size_t q = 0; q < t.points.size(); ++q) {
      const double gv = gbasis.values(t.points[q]).dot(g.coeffs.col(j));
      const Vector tb = tbasis.values(t.points[q]);
      const Point tv(tb.dot(target.x.coeffs.col(j)), tb.dot(target.y.coeffs.col(j)));
      gval[j].push_back(gv);
      tval[j].push_back(tv);
      const double w = t.weights[q];
      mean_g += w * gv;
      l1_g += w * std::abs(gv);
      norm_g += w * gv * gv;
      for (int r = 0; r < nq; ++r) rhs_g[j * nq + r] += w * gv * pressure_values_(q, r);
      for (size_t a = 0; a < t.local_to_patch.size(); ++a) {
        const int pa = t.local_to_patch[a];
        if (pa >= 0) rhs_f[pa] -= w * t.values[q].col(a).dot(tv);
      }
    }
  }
  if (patch_.is_interior && std::abs(mean_g) > 1e-9 * l1_g)
    throw CompatibilityError("patch source on an interior vertex has nonzero mean " + std::to_string(mean_g));

  const Vector a_inv_f = mass_llt_.solve(rhs_f);
  const Vector multiplier = schur_llt_.solve(b_ * a_inv_f - rhs_g);
  const Vector sigma = mass_llt_.solve(rhs_f - b_.transpose() * multiplier);

  PatchFlux out;
  out.vertex = patch_.vertex;
  out.dofs = free_dofs_;
  out.coeffs = sigma;
  const double scale = rhs_f.norm() + rhs_g.norm();
  const double kkt = (mass_ * sigma + b_.transpose() * multiplier - rhs_f).norm() + (b_ * sigma - rhs_g).norm();
  out.kkt_residual = scale > 0.0 ? kkt / scale : kkt;

  double objective = 0.0, constraint = 0.0;
  for (int j = 0; j < ncell; ++j) {
    const auto& t = tables_[j];
    Vector local = Vector::Zero(static_cast<Eigen::Index>(t.local_to_patch.size()));
    for (size_t a = 0; a < t.local_to_patch.size(); ++a)
      if (t.local_to_patch[a] >= 0) local[a] = sigma[t.local_to_patch[a]];
    for (size_t q = 0; q < t.points.size(); ++q) {
      const Vector v = t.values[q] * local;
      const Point s = Point(v[0], v[1]) + tval[j][q];
      const double d = t.divs[q].dot(local) - gval[j][q];
      objective += t.weights[q] * s.squaredNorm();
      constraint += t.weights[q] * d * d;
    }
  }
  out.objective = std::sqrt(objective);
  out.constraint_residual = std::sqrt(constraint);
  out.source_norm = std::sqrt(norm_g);
  return out;
}

PatchPolynomial patch_source(const TimeSlabSolution& sol, const VertexPatch& patch, int interval, int degree) {
  check_solution(sol, interval);
  const auto& space = *sol.space;
  const auto& m = space.mesh();
  const int p = space.degree();
  const int exact = std::max(p, source_degree(sol)) + 1;
  if (degree < 0) degree = exact;
  if (degree < exact) throw InvalidArgument("patch source degree too low for an exact representation");
  const double tau = sol.partition->step(interval);
  const Vector& u = sol.nodes[interval + 1];
  const Vector dudt = (sol.nodes[interval + 1] - sol.nodes[interval]) / tau;
  const CellField& f = sol.source[interval];

  PatchPolynomial out;
  out.dim = m.dim();
  out.degree = degree;
  out.cells = patch.cells;
  out.coeffs.resize(lagrange_basis(m.dim(), degree).size(), static_cast<Eigen::Index>(patch.cells.size()));
  for (size_t j = 0; j < patch.cells.size(); ++j) {
    const int K = patch.cells[j];
    const int i = local_index(m, K, patch.vertex);
    const Point grad_psi = hat_gradient(m.geometry(K), m.dim(), i);
    out.coeffs.col(static_cast<Eigen::Index>(j)) = project_local(m.dim(), degree, degree + exact + 2, [&](const Point& xi) {
      const double psi = hat_value(m.dim(), i, xi);
      return psi * (f.value(K, xi) - space.evaluate(dudt, K, xi)) - grad_psi.dot(space.gradient(u, K, xi));
    });
  }
  return out;
}

PatchVectorPolynomial patch_target(const TimeSlabSolution& sol, const VertexPatch& patch, int interval) {
  check_solution(sol, interval);
  const auto& space = *sol.space;
  const auto& m = space.mesh();
  const int p = space.degree();
  const Vector& u = sol.nodes[interval + 1];
  PatchVectorPolynomial out;
  for (auto* c : {&out.x, &out.y}) {
    c->dim = m.dim();
    c->degree = p;
    c->cells = patch.cells;
    c->coeffs.resize(lagrange_basis(m.dim(), p).size(), static_cast<Eigen::Index>(patch.cells.size()));
  }
  for (size_t j = 0; j < patch.cells.size(); ++j) {
    const int K = patch.cells[j];
    const int i = local_index(m, K, patch.vertex);
    for (int comp = 0; comp < 2; ++comp) {
      auto& c = comp == 0 ? out.x : out.y;
      c.coeffs.col(static_cast<Eigen::Index>(j)) = project_local(m.dim(), p, 2 * p + 2, [&](const Point& xi) {
        return hat_value(m.dim(), i, xi) * space.gradient(u, K, xi)[comp];
      });
    }
  }
  return out;
}

PatchFlux solve_patch(std::shared_ptr<const RTNSpace> space, const VertexPatch& patch, const PatchPolynomial& g,
                      const PatchVectorPolynomial& target) {
  return PatchSolver(std::move(space), patch).solve(g, target);
}

EquilibratedFlux assemble_flux(const TimeSlabSolution& sol, int flux_degree, Execution exec) {
  check_solution(sol, 0);
  const int p = sol.space->degree();
  if (flux_degree < std::max(p, source_degree(sol)) + 1)
    throw InvalidArgument("flux degree must exceed the solution and source degrees");
  const int n_int = sol.num_intervals();
  auto space = std::make_shared<const RTNSpace>(sol.space->mesh_ptr(), flux_degree);
  const auto patches = vertex_patches(sol.space->mesh());
  std::vector<std::vector<PatchFlux>> local(patches.size());
  for_each_index(static_cast<int>(patches.size()), exec, [&](int a) {
    const PatchSolver solver(space, patches[a]);
    local[a].reserve(n_int);
    for (int n = 0; n < n_int; ++n)
      local[a].push_back(solver.solve(patch_source(sol, patches[a], n, flux_degree), patch_target(sol, patches[a], n)));
  });

  EquilibratedFlux flux;
  flux.space = space;
  flux.coeffs.assign(n_int, Vector::Zero(space->num_dofs()));
  for (size_t a = 0; a < patches.size(); ++a)
    for (int n = 0; n < n_int; ++n) {
      const auto& pf = local[a][n];
      for (size_t i = 0; i < pf.dofs.size(); ++i) flux.coeffs[n][pf.dofs[i]] += pf.coeffs[static_cast<Eigen::Index>(i)];
      flux.max_constraint_residual =
          std::max(flux.max_constraint_residual, pf.constraint_residual / (1.0 + pf.source_norm));
      flux.max_kkt_residual = std::max(flux.max_kkt_residual, pf.kkt_residual);
    }
  return flux;
}

double equilibration_residual(const EquilibratedFlux& flux, const TimeSlabSolution& sol) {
  check_solution(sol, 0);
  if (flux.num_intervals() != sol.num_intervals()) throw InvalidArgument("flux and solution interval counts differ");
  const auto& space = *sol.space;
  const auto& rtn = *flux.space;
  const auto& m = space.mesh();
  const auto& rule = cached_simplex_rule(m.dim(), 2 * rtn.order() + 2);
  double worst = 0.0, fmax = 0.0;
  Matrix v;
  Vector d;
  for (int n = 0; n < sol.num_intervals(); ++n) {
    const Vector dudt = (sol.nodes[n + 1] - sol.nodes[n]) / sol.partition->step(n);
    for (int K = 0; K < m.num_cells(); ++K) {
      const auto dofs = rtn.cell_dofs(K);
      for (int q = 0; q < rule.size(); ++q) {
        rtn.evaluate(K, rule.points[q], v, d);
        double div = 0.0;
        for (int i = 0; i < rtn.local_size(); ++i) div += d[i] * flux.coeffs[n][dofs[i]];
        const double f = sol.source[n].value(K, rule.points[q]);
        fmax = std::max(fmax, std::abs(f));
        worst = std::max(worst, std::abs(f - space.evaluate(dudt, K, rule.points[q]) - div));
      }
    }
  }
  return worst / (1.0 + fmax);
}

double max_normal_jump(const RTNSpace& space, const Vector& coeffs) {
  const auto& m = space.mesh();
  const auto& rule = gauss_legendre(space.order() + 2);
  double worst = 0.0;
  for (int f = 0; f < m.num_faces(); ++f) {
    if (m.is_boundary_face(f)) continue;
    const auto& cells = m.face_cells(f);
    const Point normal = m.face_normal(f);
    for (int q = 0; q < (m.dim() == 1 ? 1 : rule.size()); ++q) {
      const Point x = space.face_point(f, rule.points[q][0]);
      const Point a = space.value(coeffs, cells[0], m.geometry(cells[0]).to_reference(x));
      const Point b = space.value(coeffs, cells[1], m.geometry(cells[1]).to_reference(x));
      worst = std::max(worst, std::abs((a - b).dot(normal)));
    }
  }
  return worst;
}

}  // namespace parest
