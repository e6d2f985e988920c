#include "parest/norms.hpp"

#include <cmath>
#include <map>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

namespace {

// 2-point Gauss on [0,1]: exact for the quadratic-in-time integrands of affine fields.
constexpr double kG0 = 0.21132486540518711775;
constexpr double kG1 = 0.78867513459481288225;

double quad_form(const SparseMatrix& a, const Vector& x, const Vector& y) { return x.dot(a * y); }

/// int_0^tau of grad(affine a -> b) squared: tau/3 (a'Aa + a'Ab + b'Ab).
double affine_energy(const SparseMatrix& a_mat, const Vector& a, const Vector& b, double tau) {
  const Vector aa = a_mat * a, ab = a_mat * b;
  return tau / 3.0 * (a.dot(aa) + a.dot(ab) + b.dot(ab));
}

void require_continuous(const SpaceTimeFunction& v) {
  if (v.profile() != Profile::continuous_affine)
    throw ProfileMismatch(std::string("Y-type norm requires a continuous_affine profile, got ") + profile_name(v.profile()));
}

bool is_y_type(NormKind kind) { return kind == NormKind::Y || kind == NormKind::Y_T || kind == NormKind::Y_star; }

}  // namespace

// ------------------------------------------------------------------ context

RieszLiftContext::RieszLiftContext(SpacePtr trial, SpacePtr lift, int refinement_level)
    : trial_(std::move(trial)), lift_(std::move(lift)), level_(refinement_level) {
  mass_ = std::make_shared<SymmetricOperator>(assemble(*lift_, OperatorKind::mass));
  stiffness_ = std::make_shared<SymmetricOperator>(assemble(*lift_, OperatorKind::stiffness));
  solver_ = std::make_shared<SpdSolver>(*stiffness_);
  prolong_ = parest::prolongation(*trial_, *lift_);
}

RieszLiftContext::RieszLiftContext(std::shared_ptr<const SymmetricOperator> mass,
                                   std::shared_ptr<const SymmetricOperator> stiffness, SparseMatrix prolongation,
                                   int refinement_level)
    : mass_(std::move(mass)), stiffness_(std::move(stiffness)), prolong_(std::move(prolongation)), level_(refinement_level) {
  solver_ = std::make_shared<SpdSolver>(*stiffness_);
}

RieszLiftContext RieszLiftContext::for_solution(const TimeSlabSolution& sol) {
  if (sol.space) return RieszLiftContext(sol.space, sol.space, 1);
  SparseMatrix id(sol.mass->dimension(), sol.mass->dimension());
  id.setIdentity();
  return RieszLiftContext(sol.mass, sol.stiffness, id, 1);
}

RieszLiftContext RieszLiftContext::with_trial(SpacePtr trial, SparseMatrix prolongation) const {
  if (prolongation.rows() != dimension()) throw InvalidArgument("with_trial: prolongation does not map into the lift space");
  RieszLiftContext c = *this;
  c.trial_ = std::move(trial);
  c.prolong_ = std::move(prolongation);
  return c;
}

Vector RieszLiftContext::riesz(const Vector& functional) const { return solver_->solve(functional); }

double RieszLiftContext::dual_norm_sq(const Vector& functional) const {
  if (functional.size() != dimension()) throw InvalidArgument("dual_norm: functional has wrong size");
  return std::max(0.0, functional.dot(riesz(functional)));
}

Vector RieszLiftContext::to_lift(const Vector& trial) const {
  if (trial.size() != prolong_.cols()) throw InvalidArgument("to_lift: vector does not live on the trial space");
  return prolong_ * trial;
}

SlabField RieszLiftContext::to_lift(const SlabField& trial) const {
  if (trial.initial.size() != prolong_.cols()) throw InvalidArgument("to_lift: field does not live on the trial space");
  SlabField r{trial.partition, prolong_ * trial.initial, {}, {}};
  for (int i = 0; i < trial.num_intervals(); ++i) {
    r.start.push_back(prolong_ * trial.start[i]);
    r.end.push_back(prolong_ * trial.end[i]);
  }
  return r;
}

// ------------------------------------------------------------- load history

LoadHistory LoadHistory::piecewise_constant(std::vector<Vector> per_interval) {
  LoadHistory h;
  h.constant_ = std::move(per_interval);
  h.points_ = 2;
  return h;
}

LoadHistory LoadHistory::function(std::function<Vector(int, double)> fn, int points_per_interval) {
  LoadHistory h;
  h.fn_ = std::move(fn);
  h.points_ = std::max(2, points_per_interval);
  return h;
}

LoadHistory LoadHistory::zero(int num_intervals, int dimension) {
  return piecewise_constant(std::vector<Vector>(num_intervals, Vector::Zero(dimension)));
}

Vector LoadHistory::at(int interval, double t) const { return fn_ ? fn_(interval, t) : constant_[interval]; }

LoadHistory source_loads(const Source& f, const RieszLiftContext& ctx, const TimePartition& partition,
                         SourceSampling mode) {
  if (!ctx.lift_space()) throw InvalidArgument("source_loads: context has no lift space");
  const ScalarSpace& space = *ctx.lift_space();
  if (mode == SourceSampling::pointwise)
    return LoadHistory::function([&f, &space](int, double t) { return f.load(space, t); });
  const QuadratureRule rule = gauss_legendre(kTimeMeanPoints);
  std::vector<Vector> means;
  for (int i = 0; i < partition.num_intervals(); ++i) {
    Vector m = Vector::Zero(space.dimension());
    for (int g = 0; g < rule.size(); ++g)
      m += rule.weights[g] * f.load(space, partition.node(i) + partition.step(i) * rule.points[g][0]);
    means.push_back(std::move(m));
  }
  return LoadHistory::piecewise_constant(std::move(means));
}

LoadHistory discrete_loads(const TimeSlabSolution& sol, const RieszLiftContext& ctx) {
  const bool same = !ctx.lift_space() || !sol.space ||
                    (ctx.lift_space()->mesh_ptr() == sol.space->mesh_ptr() && ctx.lift_space()->degree() == sol.space->degree());
  if (same) return LoadHistory::piecewise_constant(sol.loads);
  if (sol.source.empty()) throw UnsupportedData("discrete_loads: solution carries no cellwise data");
  const auto parent = parent_cells(sol.space->mesh_ptr(), ctx.lift_space()->mesh());
  std::vector<Vector> loads;
  for (const auto& field : sol.source) loads.push_back(load_vector(*ctx.lift_space(), field, parent));
  return LoadHistory::piecewise_constant(std::move(loads));
}

// -------------------------------------------------------------------- norms

const char* norm_name(NormKind kind) {
  switch (kind) {
    case NormKind::X: return "X";
    case NormKind::Y: return "Y";
    case NormKind::Y_T: return "Y_T";
    case NormKind::Y_star: return "Y_star";
    case NormKind::energy: return "energy";
  }
  return "?";
}

double dual_norm(const Vector& functional, const RieszLiftContext& ctx) { return std::sqrt(ctx.dual_norm_sq(functional)); }

double dual_norm(const std::vector<Vector>& per_interval, const TimePartition& partition, const RieszLiftContext& ctx) {
  double s = 0.0;
  for (int i = 0; i < partition.num_intervals(); ++i) s += partition.step(i) * ctx.dual_norm_sq(per_interval[i]);
  return std::sqrt(s);
}

NormParts norm_parts(const SlabField& v, const RieszLiftContext& ctx, std::vector<NormParts>* per_interval) {
  NormParts total;
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  if (per_interval) per_interval->assign(v.num_intervals(), NormParts{});
  for (int i = 0; i < v.num_intervals(); ++i) {
    const double tau = v.partition->step(i);
    const Vector md = m * v.derivative(i);
    NormParts p;
    p.dt_dual_sq = tau * ctx.dual_norm_sq(md);
    p.grad_sq = affine_energy(a, v.start[i], v.end[i], tau);
    total.dt_dual_sq += p.dt_dual_sq;
    total.grad_sq += p.grad_sq;
    if (per_interval) (*per_interval)[i] = p;
  }
  total.initial_sq = quad_form(m, v.initial, v.initial);
  total.final_sq = quad_form(m, v.end.back(), v.end.back());
  return total;
}

double combine(const NormParts& p, NormKind kind) {
  double s = 0.0;
  switch (kind) {
    case NormKind::X: s = p.grad_sq; break;
    case NormKind::Y: s = p.dt_dual_sq + p.grad_sq + p.final_sq; break;
    case NormKind::Y_T: s = p.dt_dual_sq + p.grad_sq + p.initial_sq; break;
    case NormKind::Y_star: s = p.dt_dual_sq + p.grad_sq + p.initial_sq + p.final_sq; break;
    case NormKind::energy: s = p.grad_sq + 0.5 * p.final_sq; break;
  }
  return std::sqrt(std::max(0.0, s));
}

double spacetime_norm(const SpaceTimeFunction& v, NormKind kind, const RieszLiftContext& ctx) {
  if (is_y_type(kind)) require_continuous(v);
  return combine(norm_parts(ctx.to_lift(v.slabs()), ctx), kind);
}

double spacetime_norm(const SlabField& v, NormKind kind, const RieszLiftContext& ctx) {
  if (is_y_type(kind) && !v.is_continuous(1e-10))
    throw ProfileMismatch("Y-type norm requested for a field that jumps in time");
  return combine(norm_parts(ctx.to_lift(v), ctx), kind);
}

double ys_identity_residual(const SpaceTimeFunction& v, const RieszLiftContext& ctx) {
  require_continuous(v);
  const SlabField s = ctx.to_lift(v.slabs());
  const NormParts parts = norm_parts(s, ctx);
  const double formula_a = parts.dt_dual_sq + parts.grad_sq + parts.initial_sq + parts.final_sq;
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  double formula_b = 2.0 * parts.final_sq;
  for (int i = 0; i < s.num_intervals(); ++i) {
    const double tau = s.partition->step(i);
    const Vector md = m * s.derivative(i);
    for (double g : {kG0, kG1}) {
      const Vector vt = s.start[i] + g * (s.end[i] - s.start[i]);
      formula_b += 0.5 * tau * ctx.dual_norm_sq(md - a * vt);
    }
  }
  if (formula_a == 0.0) return std::abs(formula_b);
  return std::abs(formula_a - formula_b) / formula_a;
}

double infsup_identity_residual(const SpaceTimeFunction& v, const RieszLiftContext& ctx) {
  require_continuous(v);
  const SlabField s = ctx.to_lift(v.slabs());
  const NormParts parts = norm_parts(s, ctx);
  const double y_sq = parts.dt_dual_sq + parts.grad_sq + parts.final_sq;
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  double lhs = parts.initial_sq;
  for (int i = 0; i < s.num_intervals(); ++i) {
    const Vector w = ctx.riesz(m * s.derivative(i));
    lhs += affine_energy(a, w + s.start[i], w + s.end[i], s.partition->step(i));
  }
  if (y_sq == 0.0) return std::abs(lhs);
  return std::abs(lhs - y_sq) / y_sq;
}

double residual_dual_norm_Y(const SpaceTimeFunction& candidate, const LoadHistory& data, const RieszLiftContext& ctx,
                            const SpaceTimeFunction* diffusion_argument) {
  require_continuous(candidate);
  const SlabField s = ctx.to_lift(candidate.slabs());
  const SlabField w = diffusion_argument ? ctx.to_lift(diffusion_argument->slabs()) : s;
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  const QuadratureRule rule = gauss_legendre(data.points_per_interval());
  double total = 0.0;
  for (int i = 0; i < s.num_intervals(); ++i) {
    const double tau = s.partition->step(i), t0 = s.partition->node(i);
    const Vector md = m * s.derivative(i);
    for (int g = 0; g < rule.size(); ++g) {
      const double x = rule.points[g][0];
      const Vector r = data.at(i, t0 + x * tau) - md - a * (w.start[i] + x * (w.end[i] - w.start[i]));
      total += rule.weights[g] * tau * ctx.dual_norm_sq(r);
    }
  }
  return std::sqrt(total);
}

BackwardRepresenter backward_representer(const SpaceTimeFunction& v, const RieszLiftContext& ctx) {
  const SlabField s = ctx.to_lift(v.slabs());
  const auto& partition = s.partition;
  const int n = partition->num_intervals();
  const SparseMatrix& m = ctx.mass().matrix();
  const SparseMatrix& a = ctx.stiffness().matrix();
  std::vector<Vector> phi(n + 1, Vector::Zero(ctx.dimension()));
  std::map<double, std::unique_ptr<SpdSolver>> solvers;
  for (int i = n - 1; i >= 0; --i) {
    const double tau = partition->step(i);
    auto& solver = solvers[tau];
    if (!solver) solver = std::make_unique<SpdSolver>(SymmetricOperator(SparseMatrix(m / tau + a)));
    const Vector mean = 0.5 * (s.start[i] + s.end[i]);
    phi[i] = solver->solve(m * phi[i + 1] / tau + a * mean);
  }
  SpaceTimeFunction phi_fn(Profile::continuous_affine, partition, phi, ctx.lift_space());
  double pairing = 0.0;
  for (int i = 0; i < n; ++i) {
    const double tau = partition->step(i);
    const Vector dphi = (phi[i + 1] - phi[i]) / tau;
    const Vector& va = s.start[i];
    const Vector& vb = s.end[i];
    pairing -= tau * 0.5 * (va + vb).dot(m * dphi);
    const Vector ap = a * phi[i], aq = a * phi[i + 1];
    pairing += tau / 6.0 * (2.0 * va.dot(ap) + va.dot(aq) + vb.dot(ap) + 2.0 * vb.dot(aq));
  }
  SlabField ps = phi_fn.slabs();
  const double yt = combine(norm_parts(ps, ctx), NormKind::Y_T);
  BackwardRepresenter out{std::move(phi_fn), pairing, yt, yt > 0.0 ? pairing / yt : 0.0};
  return out;
}

}  // namespace parest
