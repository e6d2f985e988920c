#include "parest/verification.hpp"

#include <algorithm>
#include <random>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

double ManufacturedProblem::u_t(const Point& x, double t) const {
  switch (spec.kind) {
    case ManufacturedKind::fourier_1d:
    case ManufacturedKind::fourier_2d: return -spec.decay * u(x, t);
    case ManufacturedKind::polynomial_in_time: return x[0] * (1.0 - x[0]);
  }
  return 0.0;
}

Point ManufacturedProblem::grad_u(const Point& x, double t) const {
  using std::numbers::pi;
  const double kx = spec.kx * pi, ky = spec.ky * pi;
  switch (spec.kind) {
    case ManufacturedKind::fourier_1d:
      return Point(kx * std::cos(kx * x[0]) * std::exp(-spec.decay * t), 0.0);
    case ManufacturedKind::fourier_2d: {
      const double e = std::exp(-spec.decay * t);
      return Point(kx * std::cos(kx * x[0]) * std::sin(ky * x[1]) * e, ky * std::sin(kx * x[0]) * std::cos(ky * x[1]) * e);
    }
    case ManufacturedKind::polynomial_in_time: return Point(t * (1.0 - 2.0 * x[0]), 0.0);
  }
  return Point::Zero();
}

SourcePtr ManufacturedProblem::source() const {
  const ManufacturedSpec s = spec;
  return make_source([s](const Point& x, double t) { return manufactured_f<double>(s, x[0], x[1], t); });
}

SpatialFunction ManufacturedProblem::initial() const {
  const ManufacturedSpec s = spec;
  return [s](const Point& x) { return manufactured_u<double>(s, x[0], x[1], 0.0); };
}

MeshPtr ManufacturedProblem::mesh(int n) const {
  return dim == 1 ? build_interval_mesh(n, {0.0, 1.0}) : build_structured_triangle_mesh(n, n, {0.0, 1.0, 0.0, 1.0});
}

double manufactured_consistency(const ManufacturedSpec& spec, int samples, std::uint64_t seed, double step) {
  using L = long double;
  const bool two_d = spec.kind == ManufacturedKind::fourier_2d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const L h = step;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const L x = unit(rng), y = two_d ? unit(rng) : 0.0, t = unit(rng);
    auto u = [&](L a, L b, L c) { return manufactured_u<L>(spec, a, b, c); };
    const L ut = (u(x, y, t + h) - u(x, y, t - h)) / (2 * h);
    L lap = (u(x + h, y, t) - 2 * u(x, y, t) + u(x - h, y, t)) / (h * h);
    if (two_d) lap += (u(x, y + h, t) - 2 * u(x, y, t) + u(x, y - h, t)) / (h * h);
    const L f = manufactured_f<L>(spec, x, y, t);
    const L scale = std::max<L>(1, std::abs(ut) + std::abs(lap));
    worst = std::max(worst, static_cast<double>(std::abs(ut - lap - f) / scale));
  }
  return worst;
}

ManufacturedProblem manufactured(const ManufacturedSpec& spec) {
  if (spec.kx < 1 || (spec.kind == ManufacturedKind::fourier_2d && spec.ky < 1))
    throw InvalidArgument("manufactured: mode indices must be at least 1");
  ManufacturedProblem p;
  p.spec = spec;
  switch (spec.kind) {
    case ManufacturedKind::fourier_1d:
      p.name = "fourier_1d";
      p.dim = 1;
      break;
    case ManufacturedKind::fourier_2d:
      p.name = "fourier_2d";
      p.dim = 2;
      break;
    case ManufacturedKind::polynomial_in_time:
      p.name = "polynomial_in_time";
      p.dim = 1;
      break;
  }
  const double dev = manufactured_consistency(spec);
  if (dev > 1e-6) throw AssemblyError("manufactured forcing inconsistent with solution: " + std::to_string(dev));
  return p;
}

// ---------------------------------------------------------------- references

namespace {

struct RefinedDiscretization {
  SpacePtr space;
  PartitionPtr partition;
};

RefinedDiscretization refine_for_reference(const TimeSlabSolution& coarse, const ReferenceOptions& opt) {
  if (!coarse.space) throw InvalidArgument("reference solve needs a finite element run");
  if (opt.space_refine < 2 || opt.time_refine < 2) throw RefinementError("reference refinement ratios must be at least 2");
  auto mesh = refine_uniform(coarse.space->mesh(), opt.space_refine);
  auto space = std::make_shared<const ScalarSpace>(mesh, coarse.space->degree());
  auto partition = std::make_shared<const TimePartition>(coarse.partition->refine(opt.time_refine));
  const long long work = static_cast<long long>(space->dimension()) * partition->num_intervals();
  if (work > opt.max_dofs)
    throw RefinementError("reference discretization exceeds the dof cap (" + std::to_string(work) + " > " +
                          std::to_string(opt.max_dofs) + ")");
  return {space, partition};
}

ReferenceSolution finish_reference(TimeSlabSolution fine, const TimeSlabSolution& coarse, const ReferenceOptions& opt) {
  ReferenceSolution ref;
  ref.coarse_space = coarse.space;
  ref.coarse_partition = coarse.partition;
  ref.prolongation = prolongation(*coarse.space, *fine.space);
  ref.space_ratio = opt.space_refine;
  ref.time_ratio = opt.time_refine;
  ref.context = std::make_shared<const RieszLiftContext>(fine.space, fine.space, 1);
  ref.solution = std::move(fine);
  return ref;
}

}  // namespace

ReferenceSolution reference_solve(const ManufacturedProblem& problem, const TimeSlabSolution& coarse,
                                  const ReferenceOptions& opt) {
  const auto d = refine_for_reference(coarse, opt);
  const auto data = time_mean_rhs(*problem.source(), *d.partition, *d.space);
  const Vector u0 = initial_datum(*d.space, problem.initial());
  return finish_reference(implicit_euler_run(d.space, d.partition, data, u0, opt.exec), coarse, opt);
}

ReferenceSolution reference_solve(const TimeSlabSolution& coarse, const ReferenceOptions& opt) {
  const auto d = refine_for_reference(coarse, opt);
  if (static_cast<int>(coarse.source.size()) != coarse.num_intervals())
    throw InvalidArgument("reference solve for discrete data needs f_h,tau");
  const auto parent_cell = parent_cells(coarse.space->mesh_ptr(), d.space->mesh());
  const auto parent_interval = d.partition->parents_in(*coarse.partition);
  std::vector<CellField> projected;
  for (const auto& field : coarse.source)
    projected.push_back(CellField::project_field(d.space->mesh_ptr(), field.degree(), field, parent_cell));
  DiscreteData data;
  std::vector<Vector> loads;
  for (const auto& field : projected) loads.push_back(load_vector(*d.space, field));
  for (int i = 0; i < d.partition->num_intervals(); ++i) {
    data.fields.push_back(projected[parent_interval[i]]);
    data.loads.push_back(loads[parent_interval[i]]);
  }
  const Vector u0 = prolongation(*coarse.space, *d.space) * coarse.nodes[0];
  return finish_reference(implicit_euler_run(d.space, d.partition, data, u0, opt.exec), coarse, opt);
}

SlabField ReferenceSolution::embed(const SpaceTimeFunction& coarse) const {
  if (coarse.space() == solution.space) return refine_slabs(coarse.slabs(), solution.partition);
  if (coarse.nodes().front().size() != prolongation.cols())
    throw InvalidArgument("function does not live on the coarse space of this reference");
  return refine_slabs(coarse.slabs(), prolongation, solution.partition);
}

SlabField ReferenceSolution::field() const { return reconstruct(solution, Profile::continuous_affine).slabs(); }

NormParts reference_error_parts(const ReferenceSolution& ref, const SpaceTimeFunction& approx,
                                std::vector<NormParts>* per_coarse_interval) {
  const SlabField diff = ref.field() - ref.embed(approx);
  std::vector<NormParts> fine;
  const NormParts total = norm_parts(diff, *ref.context, per_coarse_interval ? &fine : nullptr);
  if (per_coarse_interval) {
    const auto parent = ref.solution.partition->parents_in(approx.partition());
    per_coarse_interval->assign(approx.partition().num_intervals(), NormParts{});
    for (size_t i = 0; i < fine.size(); ++i) {
      (*per_coarse_interval)[parent[i]].dt_dual_sq += fine[i].dt_dual_sq;
      (*per_coarse_interval)[parent[i]].grad_sq += fine[i].grad_sq;
    }
  }
  return total;
}

double reference_error(const ReferenceSolution& ref, const SpaceTimeFunction& approx, NormKind kind) {
  const SlabField diff = ref.field() - ref.embed(approx);
  return spacetime_norm(diff, kind, *ref.context);
}

// --------------------------------------------------------------- exact errors

NormParts exact_error_parts(const ManufacturedProblem& problem, const SpaceTimeFunction& approx,
                            const RieszLiftContext& ctx, const ExactErrorOptions& opt) {
  if (!approx.space()) throw InvalidArgument("exact_error needs a finite element function");
  const auto& space = *approx.space();
  const auto& mesh = space.mesh();
  const SlabField slabs = approx.slabs();
  const auto& time_rule = gauss_legendre(opt.time_points);
  const auto& rule = cached_simplex_rule(mesh.dim(), 2 * space.degree() + opt.extra_space_degree);
  const int nq = rule.size();

  NormParts out;
  std::vector<Point> ga(nq), gb(nq);
  for (int n = 0; n < slabs.num_intervals(); ++n) {
    const double t0 = slabs.partition->node(n), tau = slabs.partition->step(n);
    for (int K = 0; K < mesh.num_cells(); ++K) {
      const auto& g = mesh.geometry(K);
      for (int q = 0; q < nq; ++q) {
        ga[q] = space.gradient(slabs.start[n], K, rule.points[q]);
        gb[q] = space.gradient(slabs.end[n], K, rule.points[q]);
      }
      for (int r = 0; r < time_rule.size(); ++r) {
        const double s = time_rule.points[r][0], t = t0 + s * tau;
        double sum = 0.0;
        for (int q = 0; q < nq; ++q) {
          const Point e = problem.grad_u(g.map(rule.points[q]), t) - (ga[q] + s * (gb[q] - ga[q]));
          sum += rule.weights[q] * g.det * e.squaredNorm();
        }
        out.grad_sq += time_rule.weights[r] * tau * sum;
      }
    }
  }

  auto l2_sq = [&](const Vector& v, double t) {
    double sum = 0.0;
    for (int K = 0; K < mesh.num_cells(); ++K) {
      const auto& g = mesh.geometry(K);
      for (int q = 0; q < nq; ++q) {
        const double e = problem.u(g.map(rule.points[q]), t) - space.evaluate(v, K, rule.points[q]);
        sum += rule.weights[q] * g.det * e * e;
      }
    }
    return sum;
  };
  out.initial_sq = l2_sq(slabs.initial, 0.0);
  out.final_sq = l2_sq(slabs.end.back(), slabs.partition->final_time());

  if (ctx.lift_space() && slabs.is_continuous(1e-12)) {
    const auto& lift = *ctx.lift_space();
    for (int n = 0; n < slabs.num_intervals(); ++n) {
      const double t0 = slabs.partition->node(n), tau = slabs.partition->step(n);
      const Vector discrete = ctx.mass().apply(ctx.to_lift(slabs.derivative(n)));
      for (int r = 0; r < time_rule.size(); ++r) {
        const double t = t0 + time_rule.points[r][0] * tau;
        const Vector load = load_vector(lift, [&](const Point& x) { return problem.u_t(x, t); },
                                        2 * lift.degree() + opt.extra_space_degree);
        out.dt_dual_sq += time_rule.weights[r] * tau * ctx.dual_norm_sq(load - discrete);
      }
    }
  }
  return out;
}

double exact_error(const ManufacturedProblem& problem, const SpaceTimeFunction& approx, NormKind kind,
                   const RieszLiftContext& ctx, const ExactErrorOptions& opt) {
  const bool y_type = kind == NormKind::Y || kind == NormKind::Y_T || kind == NormKind::Y_star;
  if (y_type && !approx.slabs().is_continuous(1e-12))
    throw ProfileMismatch("Y-type error requested for a function that jumps in time");
  if (y_type && !ctx.lift_space()) throw InvalidArgument("Y-type exact error needs a finite element lift space");
  return combine(exact_error_parts(problem, approx, ctx, opt), kind);
}

double modal_error_sq(const ModalSolution& sol, Profile profile, int points) {
  const auto v = reconstruct(sol.discrete, profile).slabs();
  const auto& rule = gauss_legendre(points);
  double sum = 0.0;
  for (int n = 0; n < v.num_intervals(); ++n) {
    const double t0 = v.partition->node(n), tau = v.partition->step(n);
    for (int r = 0; r < rule.size(); ++r) {
      const double s = rule.points[r][0];
      const double e = sol.exact(t0 + s * tau) - (v.start[n][0] + s * (v.end[n][0] - v.start[n][0]));
      sum += rule.weights[r] * tau * e * e;
    }
  }
  return sum;
}

}  // namespace parest
