#include "parest/assembly.hpp"

#include <cmath>
#include <random>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

namespace {

struct Tabulation {
  std::vector<Vector> values;
  std::vector<Matrix> gradients;
};

Tabulation tabulate(const LagrangeBasis& basis, const QuadratureRule& rule) {
  Tabulation t;
  for (int q = 0; q < rule.size(); ++q) {
    t.values.push_back(basis.values(rule.points[q]));
    t.gradients.push_back(basis.gradients(rule.points[q]));
  }
  return t;
}

}  // namespace

std::vector<Matrix> element_matrices(const ScalarSpace& space, OperatorKind kind, Execution exec) {
  const auto& mesh = space.mesh();
  const auto& rule = cached_simplex_rule(mesh.dim(), 2 * space.degree() + 2);
  const Tabulation tab = tabulate(space.basis(), rule);
  std::vector<Matrix> out(mesh.num_cells());
  for_each_index(mesh.num_cells(), exec, [&](int k) {
    const auto& g = mesh.geometry(k);
    const int n = space.local_size();
    Matrix e = Matrix::Zero(n, n);
    for (int q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * g.det;
      if (kind == OperatorKind::mass) {
        e.noalias() += w * tab.values[q] * tab.values[q].transpose();
      } else {
        const Matrix grad = g.inverse_transpose * tab.gradients[q];
        e.noalias() += w * grad.transpose() * grad;
      }
    }
    out[k] = std::move(e);
  });
  return out;
}

SparseMatrix assemble_full(const ScalarSpace& space, OperatorKind kind, Execution exec) {
  const auto elements = element_matrices(space, kind, exec);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(elements.size() * space.local_size() * space.local_size());
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const auto dofs = space.cell_dofs(k);
    for (int i = 0; i < space.local_size(); ++i)
      for (int j = 0; j < space.local_size(); ++j) triplets.emplace_back(dofs[i], dofs[j], elements[k](i, j));
  }
  SparseMatrix m(space.num_dofs(), space.num_dofs());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

SymmetricOperator assemble(const ScalarSpace& space, OperatorKind kind, Execution exec) {
  const auto elements = element_matrices(space, kind, exec);
  std::vector<Eigen::Triplet<double>> triplets;
  for (int k = 0; k < space.mesh().num_cells(); ++k) {
    const auto dofs = space.cell_dofs(k);
    for (int i = 0; i < space.local_size(); ++i) {
      const int fi = space.free_index(dofs[i]);
      if (fi < 0) continue;
      for (int j = 0; j < space.local_size(); ++j) {
        const int fj = space.free_index(dofs[j]);
        if (fj >= 0) triplets.emplace_back(fi, fj, elements[k](i, j));
      }
    }
  }
  SparseMatrix m(space.dimension(), space.dimension());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return SymmetricOperator(std::move(m));
}

Vector load_vector(const ScalarSpace& space, const SpatialFunction& fn, int quad_degree) {
  const auto& mesh = space.mesh();
  if (quad_degree < 0) quad_degree = 2 * space.degree() + 6;
  const auto& rule = cached_simplex_rule(mesh.dim(), quad_degree);
  const Tabulation tab = tabulate(space.basis(), rule);
  Vector b = Vector::Zero(space.dimension());
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& g = mesh.geometry(k);
    Vector local = Vector::Zero(space.local_size());
    for (int q = 0; q < rule.size(); ++q) local += rule.weights[q] * g.det * fn(g.map(rule.points[q])) * tab.values[q];
    const auto dofs = space.cell_dofs(k);
    for (int i = 0; i < space.local_size(); ++i)
      if (const int f = space.free_index(dofs[i]); f >= 0) b[f] += local[i];
  }
  return b;
}

Vector load_vector(const ScalarSpace& space, const CellField& field, const std::vector<int>& parent) {
  const auto& mesh = space.mesh();
  const bool same_mesh = field.mesh_ptr().get() == &mesh;
  if (!same_mesh && parent.size() != static_cast<size_t>(mesh.num_cells()))
    throw InvalidArgument("load_vector: field lives on another mesh but no parent map was given");
  const auto& rule = cached_simplex_rule(mesh.dim(), space.degree() + field.degree());
  const Tabulation tab = tabulate(space.basis(), rule);
  Vector b = Vector::Zero(space.dimension());
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& g = mesh.geometry(k);
    Vector local = Vector::Zero(space.local_size());
    for (int q = 0; q < rule.size(); ++q) {
      const double fval = same_mesh ? field.value(k, rule.points[q])
                                    : field.value_at(parent[k], g.map(rule.points[q]));
      local += rule.weights[q] * g.det * fval * tab.values[q];
    }
    const auto dofs = space.cell_dofs(k);
    for (int i = 0; i < space.local_size(); ++i)
      if (const int f = space.free_index(dofs[i]); f >= 0) b[f] += local[i];
  }
  return b;
}

SpdSolver::SpdSolver(const SymmetricOperator& op) : op_(op) {
  if (op_.dimension() == 0) return;
  ldlt_.compute(op_.matrix());
  if (ldlt_.info() != Eigen::Success) throw SingularOperator("SpdSolver: factorization failed");
  if ((ldlt_.vectorD().array() <= 0.0).any()) throw SingularOperator("SpdSolver: operator is not positive definite");
}

Vector SpdSolver::solve(const Vector& rhs) const {
  if (op_.dimension() == 0) return Vector();
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(rhs.size());
  Vector x = ldlt_.solve(rhs);
  // A few steps of iterative refinement guard the residual contract on stiff systems.
  for (int it = 0; it < 3; ++it) {
    const Vector r = rhs - op_.matrix() * x;
    if (r.norm() <= 1e-13 * bnorm) break;
    x += ldlt_.solve(r);
  }
  const double rel = (rhs - op_.matrix() * x).norm() / bnorm;
  if (!(rel <= 1e-10)) throw SingularOperator("SpdSolver: residual " + std::to_string(rel) + " too large");
  return x;
}

Vector solve_spd(const SymmetricOperator& op, const Vector& rhs) { return SpdSolver(op).solve(rhs); }

Vector l2_projection(const ScalarSpace& space, const SpatialFunction& fn) {
  return solve_spd(assemble(space, OperatorKind::mass), load_vector(space, fn));
}

SparseMatrix prolongation(const ScalarSpace& coarse, const ScalarSpace& fine) {
  SparseMatrix p(fine.dimension(), coarse.dimension());
  if (&coarse == &fine || (coarse.mesh_ptr() == fine.mesh_ptr() && coarse.degree() == fine.degree())) {
    p.setIdentity();
    return p;
  }
  if (fine.degree() < coarse.degree()) throw InvalidArgument("prolongation: fine degree below coarse degree");
  if (std::abs(coarse.mesh().measure() - fine.mesh().measure()) > 1e-12 * coarse.mesh().measure())
    throw InvalidArgument("prolongation: meshes cover different domains");
  const auto parent = parent_cells(coarse.mesh_ptr(), fine.mesh());
  std::vector<int> owner(fine.num_dofs(), -1);
  for (int k = 0; k < fine.mesh().num_cells(); ++k)
    for (int d : fine.cell_dofs(k))
      if (owner[d] < 0) owner[d] = parent[k];
  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < fine.dimension(); ++i) {
    const int dof = fine.free_dofs()[i];
    const int K = owner[dof];
    const Point xi = coarse.mesh().geometry(K).to_reference(fine.dof_point(dof));
    const Vector phi = coarse.basis().values(xi);
    const auto cdofs = coarse.cell_dofs(K);
    for (int j = 0; j < coarse.local_size(); ++j) {
      const int fj = coarse.free_index(cdofs[j]);
      if (fj >= 0 && std::abs(phi[j]) > 1e-14) triplets.emplace_back(i, fj, phi[j]);
    }
  }
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

StabilityEstimate estimate_h1_stability(const ScalarSpace& space, const ScalarSpace& lift_space) {
  StabilityEstimate est;
  const SparseMatrix p = prolongation(space, lift_space);
  if (p.rows() == p.cols() && (space.mesh_ptr() == lift_space.mesh_ptr() && space.degree() == lift_space.degree())) {
    est.value = 1.0;
    est.converged = true;
    est.lower_estimate = false;
    return est;
  }
  const auto mc = assemble(space, OperatorKind::mass);
  const auto ac = assemble(space, OperatorKind::stiffness);
  const auto mf = assemble(lift_space, OperatorKind::mass);
  const auto af = assemble(lift_space, OperatorKind::stiffness);
  const SpdSolver mc_solver(mc), af_solver(af);
  // G v = M_f P M_c^{-1} A_c M_c^{-1} P^T M_f v is the Gram form of v -> grad(Pi_h v).
  auto apply_g = [&](const Vector& v) {
    const Vector c = mc_solver.solve(p.transpose() * (mf.matrix() * v));
    return Vector(mf.matrix() * (p * mc_solver.solve(ac.matrix() * c)));
  };
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector x(lift_space.dimension());
  for (int i = 0; i < x.size(); ++i) x[i] = dist(rng);
  double mu = 0.0;
  for (int it = 1; it <= 20000; ++it) {
    x /= std::sqrt(x.dot(af.matrix() * x));
    const Vector gx = apply_g(x);
    const double mu_new = x.dot(gx);
    est.iterations = it;
    if (it > 1 && std::abs(mu_new - mu) <= 1e-8 * std::abs(mu_new)) {
      mu = mu_new;
      est.converged = true;
      break;
    }
    mu = mu_new;
    x = af_solver.solve(gx);
  }
  est.value = std::sqrt(mu);
  return est;
}

double estimate_h1_stability_constant(const ScalarSpace& space, const ScalarSpace& lift_space) {
  return estimate_h1_stability(space, lift_space).value;
}

}  // namespace parest
