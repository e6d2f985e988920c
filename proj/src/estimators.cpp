#include "parest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double affine_energy(const Matrix& a_mat, const Vector& a, const Vector& b, double tau) {
  const Vector aa = a_mat * a, ab = a_mat * b;
  return tau / 3.0 * (a.dot(aa) + a.dot(ab) + b.dot(ab));
}

Vector gather(const Vector& all, std::span<const int> dofs) {
  Vector out(dofs.size());
  for (size_t i = 0; i < dofs.size(); ++i) out[i] = all[dofs[i]];
  return out;
}

void require_space(const TimeSlabSolution& sol, const char* what) {
  if (!sol.space) throw InvalidArgument(std::string(what) + ": needs a finite element solution");
}

/// Per-cell squared gradient energy of an affine-in-time field on every interval.
Matrix cell_energies(const ScalarSpace& space, const std::vector<Matrix>& stiff, const SlabField& v) {
  const int cells = space.mesh().num_cells();
  Matrix out(cells, v.num_intervals());
  for (int i = 0; i < v.num_intervals(); ++i) {
    const Vector a = space.expand(v.start[i]), b = space.expand(v.end[i]);
    const double tau = v.partition->step(i);
    for_each_index(cells, Execution::parallel, [&](int k) {
      const auto dofs = space.cell_dofs(k);
      out(k, i) = affine_energy(stiff[k], gather(a, dofs), gather(b, dofs), tau);
    });
  }
  return out;
}

/// f(t) - f_h,tau as a functional on a lift space.
class DataResidual {
 public:
  DataResidual(const TimeSlabSolution& sol, const ProblemData& data, const RieszLiftContext& ctx)
      : f_(data.f), space_(ctx.lift_space()) {
    if (f_) fh_ = discrete_loads(sol, ctx);
  }
  bool vanishes() const { return !f_; }
  Vector at(int n, double t) const { return f_->load(*space_, t) - fh_.at(n, t); }

 private:
  SourcePtr f_;
  SpacePtr space_;
  LoadHistory fh_;
};

/// Gradient energies per coarse (cell, interval) and patch dual norms of the time derivative
/// for differences living on a reference discretization.
class ReferenceLocalizer {
 public:
  ReferenceLocalizer(const ReferenceSolution& ref, const TimeSlabSolution& sol)
      : ref_(ref), sol_(sol), fine_space_(*ref.solution.space) {
    stiff_ = element_matrices(fine_space_, OperatorKind::stiffness);
    cell_parent_ = parent_cells(sol.space->mesh_ptr(), fine_space_.mesh());
    time_parent_ = ref.solution.partition->parents_in(*sol.partition);
  }

  Matrix coarse_cell_energies(const SlabField& diff) const {
    const Matrix fine = cell_energies(fine_space_, stiff_, diff);
    Matrix out = Matrix::Zero(sol_.space->mesh().num_cells(), sol_.num_intervals());
    for (int i = 0; i < fine.cols(); ++i)
      for (int k = 0; k < fine.rows(); ++k) out(cell_parent_[k], time_parent_[i]) += fine(k, i);
    return out;
  }

  /// sum over fine intervals in I_n of tau_i ||d_t diff||^2_{H^{-1}(omega_a)}.
  Matrix patch_dt_dual(const SlabField& diff, const PatchLifts& lifts) const {
    const SparseMatrix& m = ref_.context->mass().matrix();
    Matrix out = Matrix::Zero(lifts.num_patches(), sol_.num_intervals());
    for (int i = 0; i < diff.num_intervals(); ++i) {
      const Vector md = m * diff.derivative(i);
      const double tau = diff.partition->step(i);
      Vector col(lifts.num_patches());
      for_each_index(lifts.num_patches(), Execution::parallel,
                     [&](int a) { col[a] = tau * lifts.dual_norm_sq(a, md); });
      out.col(time_parent_[i]) += col;
    }
    return out;
  }

 private:
  const ReferenceSolution& ref_;
  const TimeSlabSolution& sol_;
  const ScalarSpace& fine_space_;
  std::vector<Matrix> stiff_;
  std::vector<int> cell_parent_;
  std::vector<int> time_parent_;
};

/// Sum over the patches of the vertices of each cell.
Matrix cells_from_patches(const SimplicialMesh& mesh, const std::vector<VertexPatch>& patches, const Matrix& per_patch) {
  std::vector<int> row(mesh.num_vertices(), -1);
  for (size_t a = 0; a < patches.size(); ++a) row[patches[a].vertex] = static_cast<int>(a);
  Matrix out = Matrix::Zero(mesh.num_cells(), per_patch.cols());
  for (int k = 0; k < mesh.num_cells(); ++k)
    for (int v = 0; v < mesh.vertices_per_cell(); ++v) out.row(k) += per_patch.row(row[mesh.cell(k)[v]]);
  return out;
}

/// Sum over the cells of each patch.
Matrix patches_from_cells(const std::vector<VertexPatch>& patches, const Matrix& per_cell) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(patches.size()), per_cell.cols());
  for (size_t a = 0; a < patches.size(); ++a)
    for (int k : patches[a].cells) out.row(static_cast<Eigen::Index>(a)) += per_cell.row(k);
  return out;
}

}  // namespace

double initial_error(const TimeSlabSolution& sol, const ProblemData& data) {
  if (!data.u0 || !sol.space) return 0.0;
  const auto& space = *sol.space;
  const auto& mesh = space.mesh();
  const auto& rule = cached_simplex_rule(mesh.dim(), 2 * space.degree() + 6);
  double s = 0.0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& g = mesh.geometry(k);
    for (int q = 0; q < rule.size(); ++q) {
      const double d = data.u0(g.map(rule.points[q])) - space.evaluate(sol.nodes[0], k, rule.points[q]);
      s += rule.weights[q] * g.det * d * d;
    }
  }
  return std::sqrt(s);
}

namespace {

Vector initial_functional(const TimeSlabSolution& sol, const ProblemData& data, const RieszLiftContext& ctx) {
  if (!data.u0) return Vector::Zero(ctx.dimension());
  return load_vector(*ctx.lift_space(), data.u0) - ctx.mass().apply(ctx.to_lift(sol.nodes[0]));
}

bool within(double lhs, double rhs, double allowance) { return lhs <= rhs * (1.0 + allowance) + 1e-14; }

}  // namespace

// ------------------------------------------------------------------ estimators

LocalizedEstimator jump_estimator(const TimeSlabSolution& sol) {
  LocalizedEstimator out;
  const int N = sol.num_intervals();
  if (!sol.space) {
    out.local.resize(1, N);
    const SparseMatrix& a = sol.stiffness->matrix();
    for (int n = 0; n < N; ++n) {
      const Vector d = sol.nodes[n + 1] - sol.nodes[n];
      out.local(0, n) = sol.partition->step(n) / 3.0 * d.dot(a * d);
    }
  } else {
    SlabField jumps{sol.partition, Vector::Zero(sol.space->dimension()), {}, {}};
    for (int n = 0; n < N; ++n) {
      const Vector d = sol.nodes[n + 1] - sol.nodes[n];
      jumps.start.push_back(d);
      jumps.end.push_back(d);
    }
    // tau/3 |grad d|^2 is the affine energy of the constant field d divided by 3.
    out.local = cell_energies(*sol.space, element_matrices(*sol.space, OperatorKind::stiffness), jumps) / 3.0;
  }
  out.total = std::sqrt(out.local_sum());
  return out;
}

FluxEstimators flux_estimators(const TimeSlabSolution& sol, const EquilibratedFlux& flux) {
  require_space(sol, "flux_estimators");
  if (flux.num_intervals() != sol.num_intervals()) throw InvalidArgument("flux and solution interval counts differ");
  const auto& space = *sol.space;
  const auto& rtn = *flux.space;
  const auto& mesh = space.mesh();
  if (&rtn.mesh() != &mesh) throw InvalidArgument("flux_estimators: flux lives on another mesh");
  const auto& rule = cached_simplex_rule(mesh.dim(), 2 * std::max(rtn.order(), space.degree()) + 2);
  const auto& basis = space.basis();
  const int nq = rule.size(), cells = mesh.num_cells(), N = sol.num_intervals();

  std::vector<Matrix> ref_grads(nq);
  for (int q = 0; q < nq; ++q) ref_grads[q] = basis.gradients(rule.points[q]);

  FluxEstimators out;
  for (auto* e : {&out.F, &out.F_prime, &out.F_double_prime}) e->local.resize(cells, N);
  Matrix c0(cells, N), c1(cells, N), c2(cells, N);

  std::vector<Vector> expanded(N + 1);
  for (int n = 0; n <= N; ++n) expanded[n] = space.expand(sol.nodes[n]);

  for_each_index(cells, Execution::parallel, [&](int k) {
    const auto& g = mesh.geometry(k);
    const auto rdofs = rtn.cell_dofs(k);
    const auto sdofs = space.cell_dofs(k);
    std::vector<Matrix> rv(nq), sg(nq);
    Vector div;
    for (int q = 0; q < nq; ++q) {
      rtn.evaluate(k, rule.points[q], rv[q], div);
      sg[q] = g.inverse_transpose * ref_grads[q];
    }
    Vector prev = gather(expanded[0], sdofs);
    for (int n = 0; n < N; ++n) {
      const Vector next = gather(expanded[n + 1], sdofs);
      const Vector sc = gather(flux.coeffs[n], rdofs);
      const Vector jump = next - prev;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, sp = 0.0, sb = 0.0;
      for (int q = 0; q < nq; ++q) {
        const double w = rule.weights[q] * g.det;
        const Point a = rv[q] * sc + sg[q] * prev;
        const Point b = sg[q] * jump;
        const Point abar = a + 0.5 * b;
        s0 += w * a.squaredNorm();
        s1 += w * a.dot(b);
        s2 += w * b.squaredNorm();
        sp += w * (a + b).squaredNorm();
        sb += w * (abar.squaredNorm() + 0.5 * abar.dot(b) + b.squaredNorm() / 12.0);
      }
      const double tau = sol.partition->step(n);
      c0(k, n) = s0;
      c1(k, n) = s1;
      c2(k, n) = s2;
      out.F.local(k, n) = tau * (s0 + s1 + s2 / 3.0);
      out.F_prime.local(k, n) = tau * sp;
      out.F_double_prime.local(k, n) = tau * sb;
      prev = next;
    }
  });
  for (auto* e : {&out.F, &out.F_prime, &out.F_double_prime}) e->total = std::sqrt(e->local_sum());
  out.time_profile.resize(N);
  for (int n = 0; n < N; ++n) out.time_profile[n] = {c0.col(n).sum(), c1.col(n).sum(), c2.col(n).sum()};
  return out;
}

// ------------------------------------------------------------------ patch lifts

PatchLifts::PatchLifts(MeshPtr coarse, SpacePtr lift) : coarse_(std::move(coarse)), lift_(std::move(lift)) {
  patches_ = vertex_patches(*coarse_);
  const auto& fine = lift_->mesh();
  const auto parent = parent_cells(coarse_, fine);
  // Coarse cells touching each free fine dof.
  std::vector<std::vector<int>> touching(lift_->dimension());
  for (int k = 0; k < fine.num_cells(); ++k)
    for (int d : lift_->cell_dofs(k)) {
      const int i = lift_->free_index(d);
      if (i < 0) continue;
      auto& list = touching[i];
      if (std::find(list.begin(), list.end(), parent[k]) == list.end()) list.push_back(parent[k]);
    }
  std::vector<std::vector<int>> fine_cells_of(coarse_->num_cells());
  for (int k = 0; k < fine.num_cells(); ++k) fine_cells_of[parent[k]].push_back(k);

  const SparseMatrix a = assemble(*lift_, OperatorKind::stiffness).matrix();
  dofs_.resize(patches_.size());
  factors_.resize(patches_.size());
  for_each_index(static_cast<int>(patches_.size()), Execution::parallel, [&](int p) {
    const auto& cells = patches_[p].cells;
    std::set<int> in;
    for (int K : cells)
      for (int k : fine_cells_of[K])
        for (int d : lift_->cell_dofs(k)) {
          const int i = lift_->free_index(d);
          if (i < 0) continue;
          const auto& t = touching[i];
          if (std::all_of(t.begin(), t.end(), [&](int c) { return std::find(cells.begin(), cells.end(), c) != cells.end(); }))
            in.insert(i);
        }
    dofs_[p].assign(in.begin(), in.end());
    const int n = static_cast<int>(dofs_[p].size());
    if (n == 0) return;
    std::vector<int> local(lift_->dimension(), -1);
    for (int j = 0; j < n; ++j) local[dofs_[p][j]] = j;
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < n; ++j)
      for (SparseMatrix::InnerIterator it(a, dofs_[p][j]); it; ++it)
        if (local[it.row()] >= 0) trip.emplace_back(local[it.row()], j, it.value());
    SparseMatrix sub(n, n);
    sub.setFromTriplets(trip.begin(), trip.end());
    auto factor = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(sub);
    if (factor->info() != Eigen::Success) throw SingularOperator("patch stiffness factorization failed");
    factors_[p] = factor;
  });
}

double PatchLifts::dual_norm_sq(int a, const Vector& functional) const {
  if (functional.size() != lift_->dimension()) throw InvalidArgument("patch dual norm: functional has wrong size");
  if (!factors_[a]) return 0.0;
  Vector l(dofs_[a].size());
  for (size_t j = 0; j < dofs_[a].size(); ++j) l[j] = functional[dofs_[a][j]];
  return std::max(0.0, l.dot(factors_[a]->solve(l)));
}

// ------------------------------------------------------------------ oscillation

const char* oscillation_name(OscillationKind kind) {
  switch (kind) {
    case OscillationKind::Y: return "Y";
    case OscillationKind::X_bound: return "X_bound";
    case OscillationKind::patch: return "patch";
    case OscillationKind::energy: return "energy";
  }
  return "?";
}

DualSup spacetime_dual_sup(const LoadHistory& g, const Vector& initial_functional, const TimePartition& partition,
                           const RieszLiftContext& ctx, bool pin_initial, double tol, int max_iterations) {
  const int N = partition.num_intervals(), dim = ctx.dimension();
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  const int first = pin_initial ? 1 : 0;
  const int blocks = N + 1 - first;

  // Load functional on nodal values of a continuous piecewise affine phi.
  std::vector<Vector> rhs(N + 1, Vector::Zero(dim));
  const QuadratureRule rule = gauss_legendre(g.points_per_interval());
  for (int n = 0; n < N; ++n) {
    const double tau = partition.step(n), t0 = partition.node(n);
    for (int q = 0; q < rule.size(); ++q) {
      const double s = rule.points[q][0];
      const Vector gq = g.at(n, t0 + s * tau);
      rhs[n] += rule.weights[q] * tau * (1.0 - s) * gq;
      rhs[n + 1] += rule.weights[q] * tau * s * gq;
    }
  }
  rhs[0] += initial_functional;

  auto pack = [&](const std::vector<Vector>& v) {
    Vector out(static_cast<Eigen::Index>(blocks) * dim);
    for (int j = 0; j < blocks; ++j) out.segment(static_cast<Eigen::Index>(j) * dim, dim) = v[j + first];
    return out;
  };
  // Gram operator of the Y_star norm.
  auto apply = [&](const Vector& x) {
    std::vector<Vector> phi(N + 1, Vector::Zero(dim)), out(N + 1, Vector::Zero(dim));
    for (int j = 0; j < blocks; ++j) phi[j + first] = x.segment(static_cast<Eigen::Index>(j) * dim, dim);
    for (int n = 0; n < N; ++n) {
      const double tau = partition.step(n);
      const Vector aa = a * phi[n], ab = a * phi[n + 1];
      out[n] += tau / 3.0 * aa + tau / 6.0 * ab;
      out[n + 1] += tau / 3.0 * ab + tau / 6.0 * aa;
      const Vector w = m * ctx.riesz(m * (phi[n + 1] - phi[n])) / tau;
      out[n + 1] += w;
      out[n] -= w;
    }
    out[0] += m * phi[0];
    out[N] += m * phi[N];
    return pack(out);
  };

  DualSup result;
  const Vector b = pack(rhs);
  if (b.lpNorm<Eigen::Infinity>() == 0.0) return result;
  Vector x = Vector::Zero(b.size()), r = b, p = r;
  double rr = r.squaredNorm();
  const double stop = tol * tol * rr;
  result.converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    const Vector ap = apply(p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    result.iterations = it + 1;
    if (rr_new <= stop) {
      result.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  result.value = std::sqrt(std::max(0.0, b.dot(x)));
  return result;
}

Oscillation oscillation(const TimeSlabSolution& sol, const ProblemData& data, OscillationKind kind,
                        const RieszLiftContext& ctx, int time_points) {
  Oscillation out;
  out.kind = kind;
  const int N = sol.num_intervals();
  out.per_interval.assign(N, 0.0);
  const QuadratureRule rule = gauss_legendre(time_points);
  const auto& part = *sol.partition;

  switch (kind) {
    case OscillationKind::Y: {
      out.surrogate = "L2(H^-1) norm of f - f_h,tau with H^-1 taken over the lift space";
      if (!data.f) break;
      const DataResidual res(sol, data, ctx);
      for (int n = 0; n < N; ++n)
        for (int q = 0; q < rule.size(); ++q)
          out.per_interval[n] +=
              rule.weights[q] * part.step(n) * ctx.dual_norm_sq(res.at(n, part.node(n) + rule.points[q][0] * part.step(n)));
      break;
    }
    case OscillationKind::X_bound: {
      out.surrogate = "sum of tau_n/(2 pi) ||f - f_h,tau||^2 over space-time cells, by quadrature";
      if (!data.f) break;
      if (!data.f->is_l2()) throw UnsupportedData("X_bound oscillation needs square-integrable data");
      require_space(sol, "oscillation");
      if (sol.source.empty()) throw UnsupportedData("X_bound oscillation needs cellwise discrete data");
      const auto& mesh = sol.space->mesh();
      const auto& srule = cached_simplex_rule(mesh.dim(), 2 * sol.source[0].degree() + 8);
      for (int n = 0; n < N; ++n) {
        const double tau = part.step(n);
        Vector cell(mesh.num_cells());
        for_each_index(mesh.num_cells(), Execution::parallel, [&](int k) {
          const auto& g = mesh.geometry(k);
          double s = 0.0;
          for (int q = 0; q < srule.size(); ++q) {
            const Point x = g.map(srule.points[q]);
            const double fh = sol.source[n].value(k, srule.points[q]);
            for (int j = 0; j < rule.size(); ++j) {
              const double d = data.f->value(x, part.node(n) + rule.points[j][0] * tau) - fh;
              s += srule.weights[q] * g.det * rule.weights[j] * tau * d * d;
            }
          }
          cell[k] = s;
        });
        out.per_interval[n] = tau / (2.0 * std::numbers::pi) * cell.sum();
      }
      break;
    }
    case OscillationKind::patch: {
      require_space(sol, "oscillation");
      out.surrogate = "per-patch L2(I_n; H^-1(omega_a)) norms with lift functions supported in the patch";
      const auto patches = vertex_patches(sol.space->mesh());
      out.per_patch = Matrix::Zero(static_cast<Eigen::Index>(patches.size()), N);
      if (!data.f) break;
      const PatchLifts lifts(sol.space->mesh_ptr(), ctx.lift_space());
      const DataResidual res(sol, data, ctx);
      for (int n = 0; n < N; ++n)
        for (int q = 0; q < rule.size(); ++q) {
          const Vector r = res.at(n, part.node(n) + rule.points[q][0] * part.step(n));
          const double w = rule.weights[q] * part.step(n);
          Vector col(lifts.num_patches());
          for_each_index(lifts.num_patches(), Execution::parallel, [&](int a) { col[a] = w * lifts.dual_norm_sq(a, r); });
          out.per_patch.col(n) += col;
        }
      for (int n = 0; n < N; ++n) out.per_interval[n] = out.per_patch.col(n).sum();
      break;
    }
    case OscillationKind::energy: {
      out.surrogate = "sup over continuous piecewise affine phi in the lift space, conjugate gradients on the Y_star Gram operator";
      const Vector e0 = sol.space ? initial_functional(sol, data, ctx) : Vector::Zero(ctx.dimension());
      if (!data.f && e0.lpNorm<Eigen::Infinity>() == 0.0) break;
      const DataResidual res(sol, data, ctx);
      const LoadHistory g = data.f ? LoadHistory::function([&res](int n, double t) { return res.at(n, t); }, time_points)
                                   : LoadHistory::zero(N, ctx.dimension());
      const DualSup sup = spacetime_dual_sup(g, e0, part, ctx, false);
      if (!sup.converged) throw SingularOperator("energy oscillation: conjugate gradients did not converge");
      out.value = sup.value;
      out.iterations = sup.iterations;
      return out;
    }
  }
  double total = 0.0;
  for (double v : out.per_interval) total += v;
  out.value = std::sqrt(total);
  return out;
}

double patch_gamma(const SimplicialMesh& mesh, const TimePartition& partition) {
  double h = 0.0, tau = std::numeric_limits<double>::infinity();
  for (const auto& p : vertex_patches(mesh)) h = std::max(h, p.diameter);
  for (int n = 0; n < partition.num_intervals(); ++n) tau = std::min(tau, partition.step(n));
  return h * h / tau;
}

double upper_estimator_Y(const TimeSlabSolution& sol, const FluxEstimators& flux, const ProblemData& data,
                         const RieszLiftContext& ctx) {
  const auto& prof = flux.time_profile;
  const auto& part = *sol.partition;
  double s = 0.0;
  if (!data.f) {
    s = flux.F.local_sum();
  } else {
    const DataResidual res(sol, data, ctx);
    const QuadratureRule rule = gauss_legendre(8);
    for (int n = 0; n < sol.num_intervals(); ++n)
      for (int q = 0; q < rule.size(); ++q) {
        const double x = rule.points[q][0];
        const double flux_part = std::sqrt(std::max(0.0, prof[n][0] + 2.0 * x * prof[n][1] + x * x * prof[n][2]));
        const double osc = std::sqrt(ctx.dual_norm_sq(res.at(n, part.node(n) + x * part.step(n))));
        s += rule.weights[q] * part.step(n) * (flux_part + osc) * (flux_part + osc);
      }
  }
  const double init = initial_error(sol, data);
  return std::sqrt(s + init * init);
}

double upper_estimator_energy(const TimeSlabSolution& sol, const FluxEstimators& flux, double eta_J,
                              const ProblemData& data, const RieszLiftContext& ctx) {
  const double fpp = flux.F_double_prime.total;
  return std::sqrt(eta_J * eta_J / 4.0 + fpp * fpp) + oscillation(sol, data, OscillationKind::energy, ctx).value;
}

// ------------------------------------------------------------------ bound reports

const char* theorem_name(Theorem t) {
  switch (t) {
    case Theorem::Y_upper_4_1: return "Y_upper_4_1";
    case Theorem::Y_lower_4_1: return "Y_lower_4_1";
    case Theorem::osc_dominated_4_2: return "osc_dominated_4_2";
    case Theorem::X_upper_4_3: return "X_upper_4_3";
    case Theorem::energy_4_5: return "energy_4_5";
    case Theorem::hypercircle_4_6: return "hypercircle_4_6";
    case Theorem::Y_upper_5_1: return "Y_upper_5_1";
    case Theorem::EY_5_2: return "EY_5_2";
    case Theorem::X_lower_5_3: return "X_lower_5_3";
    case Theorem::energy_5_5: return "energy_5_5";
  }
  return "?";
}

const std::vector<Theorem>& all_theorems() {
  static const std::vector<Theorem> all = {Theorem::Y_upper_4_1,    Theorem::Y_lower_4_1, Theorem::osc_dominated_4_2,
                                           Theorem::X_upper_4_3,    Theorem::energy_4_5,  Theorem::hypercircle_4_6,
                                           Theorem::Y_upper_5_1,    Theorem::EY_5_2,      Theorem::X_lower_5_3,
                                           Theorem::energy_5_5};
  return all;
}

std::optional<Theorem> theorem_from_name(const std::string& name) {
  for (Theorem t : all_theorems())
    if (name == theorem_name(t)) return t;
  return std::nullopt;
}

double BoundReport::detail(const std::string& key) const {
  for (const auto& [k, v] : details)
    if (k == key) return v;
  return kNaN;
}

namespace {

struct BoundWork {
  const BoundInputs& in;
  const TimeSlabSolution& sol;
  const ReferenceSolution& ref;
  RieszLiftContext ctx;  // lift = reference space, trial = solution space
  SpaceTimeFunction U, u, ubar;

  BoundWork(const BoundInputs& inputs)
      : in(inputs),
        sol(*inputs.solution),
        ref(*inputs.reference),
        ctx(inputs.reference->coarse_context()),
        U(reconstruct(sol, Profile::continuous_affine)),
        u(reconstruct(sol, Profile::constant_left_continuous)),
        ubar(reconstruct(sol, Profile::average)) {}

  std::optional<LocalizedEstimator> jump_;
  std::optional<FluxEstimators> flux_;
  std::optional<Oscillation> osc_y_, osc_patch_;
  std::optional<NormParts> parts_U_;
  std::vector<NormParts> parts_U_per_;
  std::optional<ReferenceLocalizer> localizer_;
  std::optional<PatchLifts> lifts_;

  const LocalizedEstimator& jump() {
    if (!jump_) jump_ = jump_estimator(sol);
    return *jump_;
  }
  const FluxEstimators& flux() {
    if (!in.flux) throw InvalidArgument(std::string("bound_report: this bound needs an equilibrated flux"));
    if (!flux_) flux_ = flux_estimators(sol, *in.flux);
    return *flux_;
  }
  const Oscillation& osc_y() {
    if (!osc_y_) osc_y_ = oscillation(sol, in.data, OscillationKind::Y, ctx);
    return *osc_y_;
  }
  const Oscillation& osc_patch() {
    if (!osc_patch_) osc_patch_ = oscillation(sol, in.data, OscillationKind::patch, ctx);
    return *osc_patch_;
  }
  const NormParts& parts_U() {
    if (!parts_U_) parts_U_ = reference_error_parts(ref, U, &parts_U_per_);
    return *parts_U_;
  }
  ReferenceLocalizer& localizer() {
    if (!localizer_) localizer_.emplace(ref, sol);
    return *localizer_;
  }
  const PatchLifts& lifts() {
    if (!lifts_) lifts_.emplace(sol.space->mesh_ptr(), ref.solution.space);
    return *lifts_;
  }
  double error(const SpaceTimeFunction& v, NormKind kind) { return reference_error(ref, v, kind); }

  double upper_5_1() { return upper_estimator_Y(sol, flux(), in.data, ctx); }

  /// Per (coarse cell, interval): sum over vertex patches of the patch error measure plus
  /// oscillation, the patch measure using the given gradient energies.
  Matrix patch_rhs(const Matrix& grad_cells, bool with_dt) {
    const auto& patches = lifts().patches();
    Matrix per_patch = patches_from_cells(patches, grad_cells + jump().local);
    if (with_dt) per_patch += localizer().patch_dt_dual(ref.field() - ref.embed(U), lifts());
    per_patch += osc_patch().per_patch;
    return cells_from_patches(sol.space->mesh(), patches, per_patch);
  }
};

void fill_ratios(BoundReport& r, const Matrix& lhs, const Matrix& rhs) {
  r.local_constants.clear();
  r.measured_constant = 0.0;
  for (Eigen::Index n = 0; n < lhs.cols(); ++n)
    for (Eigen::Index k = 0; k < lhs.rows(); ++k) {
      const double c = rhs(k, n) > 0.0 ? lhs(k, n) / rhs(k, n) : (lhs(k, n) > 0.0 ? kNaN : 0.0);
      r.local_constants.push_back(c);
      if (std::isnan(c) || std::isnan(r.measured_constant)) r.measured_constant = kNaN;
      else r.measured_constant = std::max(r.measured_constant, c);
    }
}

}  // namespace

BoundReport bound_report(const BoundInputs& in, Theorem theorem) {
  if (!in.solution || !in.reference) throw InvalidArgument("bound_report: solution and reference are required");
  require_space(*in.solution, "bound_report");
  const auto& ref = *in.reference;
  if (ref.space_ratio < in.min_reference_ratio || ref.time_ratio < in.min_reference_ratio)
    throw RefinementError("bound_report: reference must be at least " + std::to_string(in.min_reference_ratio) +
                          "x finer in space and time (got " + std::to_string(ref.space_ratio) + "x, " +
                          std::to_string(ref.time_ratio) + "x)");

  BoundWork w(in);
  BoundReport r;
  r.theorem = theorem;
  r.name = theorem_name(theorem);
  r.reference_space_ratio = ref.space_ratio;
  r.reference_time_ratio = ref.time_ratio;
  r.surrogate = "errors against a reference run " + std::to_string(ref.space_ratio) + "x finer in space and " +
                std::to_string(ref.time_ratio) + "x finer in time; dual norms over the reference space";
  const double eta_J = w.jump().total;
  const double a = in.allowance;

  switch (theorem) {
    case Theorem::Y_upper_4_1: {
      r.error = combine(w.parts_U(), NormKind::Y);
      r.estimator = eta_J + w.osc_y().value;
      r.satisfied = within(r.error, r.estimator, a);
      r.details = {{"eta_J", eta_J}, {"osc_Y", w.osc_y().value}};
      break;
    }
    case Theorem::Y_lower_4_1: {
      r.upper_bound = false;
      r.error = combine(w.parts_U(), NormKind::Y) + w.osc_y().value;
      r.estimator = eta_J;
      const bool global = within(eta_J, r.error, a);
      // Local in time: eta_J,n^2 against int_{I_n} (||d_t e||_{-1} + ||grad e|| + ||f - f_tau||_{-1})^2.
      const SlabField e = ref.field() - ref.embed(w.U);
      std::vector<NormParts> fine;
      norm_parts(e, w.ctx, &fine);
      const auto parent = ref.solution.partition->parents_in(*w.sol.partition);
      const SparseMatrix& amat = w.ctx.stiffness().matrix();
      const DataResidual res(w.sol, in.data, w.ctx);
      const QuadratureRule rule = gauss_legendre(4);
      Vector rhs = Vector::Zero(w.sol.num_intervals());
      for (int i = 0; i < e.num_intervals(); ++i) {
        const double tau = e.partition->step(i), t0 = e.partition->node(i);
        const double dt = std::sqrt(fine[i].dt_dual_sq / tau);
        const Vector as = amat * e.start[i], ae = amat * e.end[i];
        const double ss = e.start[i].dot(as), se = e.start[i].dot(ae), ee = e.end[i].dot(ae);
        for (int q = 0; q < rule.size(); ++q) {
          const double x = rule.points[q][0];
          const double grad = std::sqrt(std::max(0.0, (1 - x) * (1 - x) * ss + 2 * x * (1 - x) * se + x * x * ee));
          const double osc = res.vanishes() ? 0.0 : std::sqrt(w.ctx.dual_norm_sq(res.at(parent[i], t0 + x * tau)));
          rhs[parent[i]] += rule.weights[q] * tau * (dt + grad + osc) * (dt + grad + osc);
        }
      }
      const Matrix lhs = w.jump().local.colwise().sum();
      fill_ratios(r, lhs, rhs.transpose());
      bool local = true;
      for (int n = 0; n < w.sol.num_intervals(); ++n) local = local && within(lhs(0, n), rhs[n], 0.05);
      r.satisfied = global && local;
      r.details = {{"eta_J", eta_J}, {"osc_Y", w.osc_y().value}, {"local_in_time_holds", local ? 1.0 : 0.0}};
      break;
    }
    case Theorem::osc_dominated_4_2: {
      r.upper_bound = false;
      w.parts_U();
      const Matrix jn = w.jump().local.colwise().sum();
      Matrix lhs(1, w.sol.num_intervals()), rhs(1, w.sol.num_intervals());
      for (int n = 0; n < w.sol.num_intervals(); ++n) {
        lhs(0, n) = jn(0, n) + w.osc_y().per_interval[n];
        rhs(0, n) = w.parts_U_per_[n].dt_dual_sq + w.parts_U_per_[n].grad_sq;
      }
      r.estimator = std::sqrt(lhs.sum());
      r.error = std::sqrt(rhs.sum());
      fill_ratios(r, lhs, rhs);
      r.satisfied = std::isfinite(r.measured_constant);
      r.details = {{"eta_J", eta_J}, {"osc_Y", w.osc_y().value}};
      break;
    }
    case Theorem::X_upper_4_3: {
      const double osc_x = oscillation(w.sol, in.data, OscillationKind::X_bound, w.ctx).value;
      const double eu = w.error(w.u, NormKind::X), eU = w.error(w.U, NormKind::X);
      r.error = std::max(eu, eU);
      r.estimator = eta_J + osc_x;
      r.satisfied = within(r.error, r.estimator, a);
      r.details = {{"error_X_u", eu}, {"error_X_U", eU}, {"eta_J", eta_J}, {"osc_X_bound", osc_x}};
      break;
    }
    case Theorem::energy_4_5: {
      const double osc_e = oscillation(w.sol, in.data, OscillationKind::energy, w.ctx).value;
      const double ebar = w.error(w.ubar, NormKind::energy);
      const double ex = w.error(w.u, NormKind::X) + w.error(w.U, NormKind::X);
      r.error = ebar;
      r.estimator = 0.5 * eta_J + osc_e;
      const bool lower = within(0.5 * eta_J, ebar + osc_e, a);
      r.satisfied = within(ebar, r.estimator, a) && lower;
      r.details = {{"eta_J", eta_J},
                   {"osc_E", osc_e},
                   {"lower_holds", lower ? 1.0 : 0.0},
                   {"triangle_measure_X", ex},
                   {"triangle_ratio", ebar > 0 ? ex / ebar : kNaN}};
      break;
    }
    case Theorem::hypercircle_4_6: {
      r.upper_bound = false;
      const double eu = w.error(w.u, NormKind::energy), eU = w.error(w.U, NormKind::energy);
      r.error = std::sqrt(eu * eu + eU * eU);
      r.estimator = eta_J;
      const double gap = eta_J > 0 ? std::abs(eu * eu + eU * eU - eta_J * eta_J) / (eta_J * eta_J) : kNaN;
      r.satisfied = gap <= a;
      r.measured_constant = gap;
      r.details = {{"error_E_u", eu}, {"error_E_U", eU}, {"eta_J", eta_J}, {"relative_gap", gap}};
      break;
    }
    case Theorem::Y_upper_5_1: {
      r.error = combine(w.parts_U(), NormKind::Y);
      r.estimator = w.upper_5_1();
      r.satisfied = within(r.error, r.estimator, a);
      r.details = {{"eta_F", w.flux().F.total}, {"initial_term", initial_error(w.sol, in.data)}};
      break;
    }
    case Theorem::EY_5_2: {
      const double ey = combine(w.parts_U(), NormKind::Y);
      r.error = std::sqrt(ey * ey + eta_J * eta_J);
      r.estimator = std::hypot(w.upper_5_1(), eta_J);
      const double ratio = ey > 0 ? r.error / ey : kNaN;
      const bool equiv = ratio >= 1.0 / (1.0 + a) && ratio <= 3.0 * (1.0 + a);
      r.satisfied = within(r.error, r.estimator, a) && equiv;
      // Local lower bound per (K, n).
      const Matrix grad = w.localizer().coarse_cell_energies(ref.field() - ref.embed(w.U));
      const Matrix lhs = w.flux().F.local + w.jump().local;
      fill_ratios(r, lhs, w.patch_rhs(grad, true));
      const double eta_f = w.flux().F.total;
      const double osc_sum = w.osc_patch().per_patch.sum();
      const double glhs = eta_f * eta_f + eta_J * eta_J, grhs = r.error * r.error + osc_sum;
      r.details = {{"error_Y", ey},
                   {"equivalence_ratio", ratio},
                   {"equivalence_holds", equiv ? 1.0 : 0.0},
                   {"eta_F", eta_f},
                   {"eta_J", eta_J},
                   {"osc_patch_sum_sq", osc_sum},
                   {"global_lower_lhs", glhs},
                   {"global_lower_rhs", grhs},
                   {"global_lower_constant", grhs > 0 ? glhs / grhs : kNaN}};
      break;
    }
    case Theorem::X_lower_5_3: {
      r.upper_bound = false;
      const double ex = w.error(w.u, NormKind::X);
      const double eta_fp = w.flux().F_prime.total;
      const double osc_sum = w.osc_patch().per_patch.sum();
      r.error = std::sqrt(ex * ex + eta_J * eta_J + osc_sum);
      r.estimator = eta_fp;
      const Matrix grad = w.localizer().coarse_cell_energies(ref.field() - ref.embed(w.u));
      fill_ratios(r, w.flux().F_prime.local, w.patch_rhs(grad, false));
      const double global = r.error > 0 ? eta_fp * eta_fp / (r.error * r.error) : kNaN;
      r.satisfied = std::isfinite(r.measured_constant);
      r.details = {{"error_X_u", ex},
                   {"eta_J", eta_J},
                   {"eta_F_prime", eta_fp},
                   {"global_constant", global},
                   {"gamma", patch_gamma(w.sol.space->mesh(), *w.sol.partition)}};
      break;
    }
    case Theorem::energy_5_5: {
      const double osc_e = oscillation(w.sol, in.data, OscillationKind::energy, w.ctx).value;
      const double ebar = w.error(w.ubar, NormKind::energy);
      const double fpp = w.flux().F_double_prime.total;
      const double est_sq = eta_J * eta_J / 4.0 + fpp * fpp;
      r.error = ebar;
      r.estimator = std::sqrt(est_sq) + osc_e;
      r.satisfied = within(ebar, r.estimator, a);
      // Lower bound constant; the pinned sup uses test functions from the trial space.
      double tilde = 0.0;
      if (in.data.f) {
        const auto trial_ctx = RieszLiftContext::for_solution(w.sol);
        const DataResidual res(w.sol, in.data, trial_ctx);
        const LoadHistory g = LoadHistory::function([&res](int n, double t) { return res.at(n, t); }, 8);
        const DualSup sup = spacetime_dual_sup(g, Vector::Zero(trial_ctx.dimension()), *w.sol.partition, trial_ctx, true);
        if (!sup.converged) throw SingularOperator("pinned oscillation: conjugate gradients did not converge");
        tilde = sup.value;
      }
      const double osc_sum = w.osc_patch().per_patch.sum();
      const double rhs = ebar * ebar + tilde * tilde + osc_sum;
      r.measured_constant = rhs > 0 ? est_sq / rhs : kNaN;
      r.details = {{"eta_J", eta_J},
                   {"eta_F_double_prime", fpp},
                   {"osc_E", osc_e},
                   {"osc_E_pinned", tilde},
                   {"osc_patch_sum_sq", osc_sum},
                   {"gamma", patch_gamma(w.sol.space->mesh(), *w.sol.partition)}};
      break;
    }
  }
  r.effectivity = r.error > 0 ? r.estimator / r.error : kNaN;
  return r;
}

Matrix EstimatorReport::localized_oscillation(const SimplicialMesh& mesh) const {
  const auto patches = vertex_patches(mesh);
  const Eigen::Index N = static_cast<Eigen::Index>(osc_patch.per_interval.size());
  Matrix out = Matrix::Zero(mesh.num_cells(), N);
  if (osc_patch.per_patch.rows() == 0) return out;
  for (size_t a = 0; a < patches.size(); ++a) {
    const double share = 1.0 / static_cast<double>(patches[a].cells.size());
    for (int k : patches[a].cells) out.row(k) += share * osc_patch.per_patch.row(static_cast<Eigen::Index>(a));
  }
  return out;
}

EstimatorReport estimator_report(const BoundInputs& in, const std::vector<Theorem>& theorems) {
  if (!in.solution) throw InvalidArgument("estimator_report: solution is required");
  const auto& sol = *in.solution;
  require_space(sol, "estimator_report");
  EstimatorReport rep;
  rep.eta_J = jump_estimator(sol);
  if (in.flux) rep.flux = flux_estimators(sol, *in.flux);
  const RieszLiftContext ctx = in.reference ? in.reference->coarse_context() : RieszLiftContext::for_solution(sol);
  rep.osc_Y = oscillation(sol, in.data, OscillationKind::Y, ctx);
  try {
    rep.osc_X_bound = oscillation(sol, in.data, OscillationKind::X_bound, ctx);
  } catch (const UnsupportedData&) {
    rep.osc_X_bound.kind = OscillationKind::X_bound;
    rep.osc_X_bound.value = kNaN;
    rep.osc_X_bound.surrogate = "not available: data is not square integrable";
  }
  rep.osc_patch = oscillation(sol, in.data, OscillationKind::patch, ctx);
  rep.osc_energy = oscillation(sol, in.data, OscillationKind::energy, ctx);
  rep.initial_term = initial_error(sol, in.data);
  rep.gamma = patch_gamma(sol.space->mesh(), *sol.partition);
  for (Theorem t : theorems) rep.bounds.push_back(bound_report(in, t));
  return rep;
}

// ------------------------------------------------------------------ modal study

InefficiencyStudy inefficiency_study(const std::vector<double>& lambdas) {
  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  for (double l : sorted)
    if (!(l > 0.0)) throw InvalidArgument("inefficiency_study: lambda values must be positive");
  InefficiencyStudy out;
  const auto partition = std::make_shared<TimePartition>(TimePartition::uniform(1.0, 1));
  for (double lambda : sorted) {
    const ModalSolution m = modal_solve({lambda, 1.0, 1.0, partition});
    InefficiencyRow row;
    row.lambda = lambda;
    row.error_u = std::sqrt(modal_error_sq(m, Profile::constant_left_continuous));
    row.error_U = std::sqrt(modal_error_sq(m, Profile::continuous_affine));
    row.eta_J = jump_estimator(m.discrete).total;
    row.ratio_u = std::sqrt(lambda) * row.error_u / row.eta_J;
    row.ratio_U = std::sqrt(lambda) * row.error_U / row.eta_J;
    row.ratio_uU = row.error_u / row.error_U;
    out.rows.push_back(row);
  }
  const size_t n = out.rows.size(), mid = n / 2;
  out.ratio_strictly_decreasing = n >= 2;
  out.large_lambda_tail_decreasing = n >= 2;
  out.small_lambda_tail_decreasing = n >= 2;
  for (size_t i = 1; i < n; ++i) {
    if (!(out.rows[i].ratio_uU < out.rows[i - 1].ratio_uU)) out.ratio_strictly_decreasing = false;
    if (i > mid && !(out.rows[i].ratio_u < out.rows[i - 1].ratio_u)) out.large_lambda_tail_decreasing = false;
    if (i <= mid && !(out.rows[i - 1].ratio_U < out.rows[i].ratio_U)) out.small_lambda_tail_decreasing = false;
  }
  return out;
}

}  // namespace parest
