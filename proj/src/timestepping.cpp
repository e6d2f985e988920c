#include "parest/timestepping.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "parest/errors.hpp"
#include "parest/quadrature.hpp"

namespace parest {

// ---------------------------------------------------------------- partition

TimePartition::TimePartition(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw InvalidArgument("TimePartition: need at least one interval");
  if (nodes_.front() != 0.0) throw InvalidArgument("TimePartition: first node must be 0");
  for (size_t i = 1; i < nodes_.size(); ++i)
    if (!(nodes_[i] > nodes_[i - 1])) throw InvalidArgument("TimePartition: nodes must increase strictly");
}

TimePartition TimePartition::uniform(double T, int N) { return graded(T, N, 1.0); }

TimePartition TimePartition::graded(double T, int N, double grading) {
  if (N < 1 || !(T > 0.0) || !(grading > 0.0)) throw InvalidArgument("TimePartition: invalid T, N or grading");
  std::vector<double> nodes(N + 1);
  for (int n = 0; n <= N; ++n) nodes[n] = n == N ? T : T * std::pow(static_cast<double>(n) / N, grading);
  return TimePartition(std::move(nodes));
}

double TimePartition::max_step() const {
  double m = 0.0;
  for (int i = 0; i < num_intervals(); ++i) m = std::max(m, step(i));
  return m;
}

TimePartition TimePartition::refine(int factor) const {
  if (factor < 1) throw InvalidArgument("TimePartition::refine: factor must be positive");
  std::vector<double> nodes{0.0};
  for (int i = 0; i < num_intervals(); ++i)
    for (int j = 1; j <= factor; ++j) nodes.push_back(j == factor ? nodes_[i + 1] : nodes_[i] + step(i) * j / factor);
  return TimePartition(std::move(nodes));
}

TimePartition TimePartition::reversed() const {
  const double T = final_time();
  std::vector<double> nodes(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) nodes[i] = T - nodes_[nodes_.size() - 1 - i];
  nodes.front() = 0.0;
  nodes.back() = T;
  return TimePartition(std::move(nodes));
}

int TimePartition::interval_containing(double t) const {
  if (t <= nodes_.front()) return 0;
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
  const int idx = static_cast<int>(it - nodes_.begin()) - 1;
  return std::clamp(idx, 0, num_intervals() - 1);
}

std::vector<int> TimePartition::parents_in(const TimePartition& coarse) const {
  const double scale = std::max(1.0, coarse.final_time());
  if (std::abs(final_time() - coarse.final_time()) > 1e-12 * scale)
    throw RefinementError("TimePartition: horizons differ");
  std::vector<int> parent(num_intervals());
  int c = 0;
  for (int i = 0; i < num_intervals(); ++i) {
    while (c < coarse.num_intervals() - 1 && nodes_[i] >= coarse.node(c + 1) - 1e-12 * scale) ++c;
    if (nodes_[i + 1] > coarse.node(c + 1) + 1e-12 * scale)
      throw RefinementError("TimePartition: not a refinement of the coarse partition");
    parent[i] = c;
  }
  for (int n = 0; n <= coarse.num_intervals(); ++n) {
    const double t = coarse.node(n);
    const bool found = std::any_of(nodes_.begin(), nodes_.end(), [&](double s) { return std::abs(s - t) <= 1e-12 * scale; });
    if (!found) throw RefinementError("TimePartition: coarse node missing from the fine partition");
  }
  return parent;
}

// ------------------------------------------------------------------ sources

Vector Source::load(const ScalarSpace& space, double t) const {
  return load_vector(space, [&](const Point& x) { return value(x, t); });
}

double FunctionalSource::value(const Point&, double) const {
  throw UnsupportedData("FunctionalSource: data has no pointwise values");
}

DiscreteSource::DiscreteSource(PartitionPtr partition, std::vector<CellField> fields)
    : partition_(std::move(partition)), fields_(std::move(fields)) {
  if (static_cast<int>(fields_.size()) != partition_->num_intervals())
    throw InvalidArgument("DiscreteSource: one field per interval required");
  locator_ = std::make_shared<CellLocator>(fields_.front().mesh_ptr());
}

double DiscreteSource::value(const Point& x, double t) const {
  const int i = partition_->interval_containing(t);
  const int k = locator_->locate(x, 1e-12);
  if (k < 0) throw InvalidArgument("DiscreteSource: point outside the mesh");
  return fields_[i].value_at(k, x);
}

Vector DiscreteSource::load(const ScalarSpace& space, double t) const {
  const CellField& field = fields_[partition_->interval_containing(t)];
  if (field.mesh_ptr() == space.mesh_ptr()) return load_vector(space, field);
  return load_vector(space, field, parent_cells(field.mesh_ptr(), space.mesh()));
}

SourcePtr make_source(std::function<double(const Point&, double)> fn) {
  return std::make_shared<FunctionSource>(std::move(fn));
}

SourcePtr zero_source() {
  return make_source([](const Point&, double) { return 0.0; });
}

DiscreteData time_mean_rhs(const Source& f, const TimePartition& partition, const ScalarSpace& space) {
  DiscreteData data;
  const QuadratureRule rule = gauss_legendre(kTimeMeanPoints);
  for (int i = 0; i < partition.num_intervals(); ++i) {
    const double t0 = partition.node(i), tau = partition.step(i);
    if (!f.is_l2()) {
      Vector mean = Vector::Zero(space.dimension());
      for (int g = 0; g < rule.size(); ++g) mean += rule.weights[g] * f.load(space, t0 + tau * rule.points[g][0]);
      data.loads.push_back(std::move(mean));
      continue;
    }
    auto mean_value = [&](const Point& x) {
      double s = 0.0;
      for (int g = 0; g < rule.size(); ++g) s += rule.weights[g] * f.value(x, t0 + tau * rule.points[g][0]);
      return s;
    };
    CellField field = CellField::project(space.mesh_ptr(), space.degree(), mean_value, 2 * space.degree() + 6);
    data.loads.push_back(load_vector(space, field));
    data.fields.push_back(std::move(field));
  }
  return data;
}

Vector initial_datum(const ScalarSpace& space, const SpatialFunction& u0, InitialProjection kind) {
  if (kind == InitialProjection::nodal) return space.interpolate(u0);
  return l2_projection(space, u0);
}

// ------------------------------------------------------------ implicit Euler

TimeSlabSolution implicit_euler_run(std::shared_ptr<const SymmetricOperator> mass,
                                    std::shared_ptr<const SymmetricOperator> stiffness, PartitionPtr partition,
                                    std::vector<Vector> loads, const Vector& u0) {
  const int N = partition->num_intervals();
  if (static_cast<int>(loads.size()) != N) throw InvalidArgument("implicit_euler_run: one load vector per interval required");
  if (u0.size() != mass->dimension()) throw InvalidArgument("implicit_euler_run: initial datum has wrong size");
  TimeSlabSolution sol;
  sol.partition = partition;
  sol.mass = mass;
  sol.stiffness = stiffness;
  sol.nodes.reserve(N + 1);
  sol.nodes.push_back(u0);
  std::map<double, std::unique_ptr<SpdSolver>> solvers;
  std::map<double, SparseMatrix> systems;
  for (int i = 0; i < N; ++i) {
    const double tau = partition->step(i);
    auto& solver = solvers[tau];
    if (!solver) {
      SparseMatrix s = mass->matrix() / tau + stiffness->matrix();
      systems[tau] = s;
      solver = std::make_unique<SpdSolver>(SymmetricOperator(std::move(s)));
    }
    const Vector rhs = mass->apply(sol.nodes.back()) / tau + loads[i];
    Vector u = solver->solve(rhs);
    const double rnorm = rhs.norm();
    if (rnorm > 0.0) sol.max_step_residual = std::max(sol.max_step_residual, (systems[tau] * u - rhs).norm() / rnorm);
    sol.nodes.push_back(std::move(u));
  }
  sol.loads = std::move(loads);
  return sol;
}

TimeSlabSolution implicit_euler_run(SpacePtr space, PartitionPtr partition, const DiscreteData& rhs, const Vector& u0,
                                    Execution exec) {
  auto mass = std::make_shared<SymmetricOperator>(assemble(*space, OperatorKind::mass, exec));
  auto stiffness = std::make_shared<SymmetricOperator>(assemble(*space, OperatorKind::stiffness, exec));
  TimeSlabSolution sol = implicit_euler_run(mass, stiffness, std::move(partition), rhs.loads, u0);
  sol.space = std::move(space);
  sol.source = rhs.fields;
  return sol;
}

// --------------------------------------------------------------- slab fields

Vector SlabField::value(double t) const {
  if (t <= 0.0) return initial;
  const int i = partition->interval_containing(t);
  const double s = (t - partition->node(i)) / partition->step(i);
  return start[i] + s * (end[i] - start[i]);
}

Vector SlabField::derivative(int i) const { return (end[i] - start[i]) / partition->step(i); }

bool SlabField::is_continuous(double tol) const {
  auto close = [tol](const Vector& a, const Vector& b) {
    return (a - b).lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>()));
  };
  if (!close(start[0], initial)) return false;
  for (int i = 1; i < num_intervals(); ++i)
    if (!close(start[i], end[i - 1])) return false;
  return true;
}

namespace {
void require_same_partition(const SlabField& a, const SlabField& b) {
  if (a.partition != b.partition && a.partition->nodes() != b.partition->nodes())
    throw InvalidArgument("SlabField: partitions differ");
  if (a.initial.size() != b.initial.size()) throw InvalidArgument("SlabField: coefficient spaces differ");
}
}  // namespace

SlabField SlabField::operator-(const SlabField& o) const {
  require_same_partition(*this, o);
  SlabField r{partition, initial - o.initial, {}, {}};
  for (int i = 0; i < num_intervals(); ++i) {
    r.start.push_back(start[i] - o.start[i]);
    r.end.push_back(end[i] - o.end[i]);
  }
  return r;
}

SlabField SlabField::operator+(const SlabField& o) const { return *this - o * -1.0; }

SlabField SlabField::operator*(double c) const {
  SlabField r{partition, initial * c, {}, {}};
  for (int i = 0; i < num_intervals(); ++i) {
    r.start.push_back(start[i] * c);
    r.end.push_back(end[i] * c);
  }
  return r;
}

SlabField refine_slabs(const SlabField& coarse, const SparseMatrix& prolong, PartitionPtr fine) {
  const auto parent = fine->parents_in(*coarse.partition);
  SlabField r{fine, prolong * coarse.initial, {}, {}};
  for (int i = 0; i < fine->num_intervals(); ++i) {
    const int c = parent[i];
    const double t0 = coarse.partition->node(c), tau = coarse.partition->step(c);
    const double s0 = (fine->node(i) - t0) / tau, s1 = (fine->node(i + 1) - t0) / tau;
    const Vector a = prolong * coarse.start[c], b = prolong * coarse.end[c];
    r.start.push_back(a + s0 * (b - a));
    r.end.push_back(a + s1 * (b - a));
  }
  return r;
}

SlabField refine_slabs(const SlabField& coarse, PartitionPtr fine) {
  SparseMatrix id(coarse.initial.size(), coarse.initial.size());
  id.setIdentity();
  return refine_slabs(coarse, id, std::move(fine));
}

// ------------------------------------------------------- space-time functions

const char* profile_name(Profile p) {
  switch (p) {
    case Profile::constant_left_continuous: return "constant_left_continuous";
    case Profile::continuous_affine: return "continuous_affine";
    case Profile::average: return "average";
  }
  return "?";
}

SpaceTimeFunction::SpaceTimeFunction(Profile profile, PartitionPtr partition, std::vector<Vector> nodes, SpacePtr space)
    : profile_(profile), partition_(std::move(partition)), nodes_(std::move(nodes)), space_(std::move(space)) {
  if (static_cast<int>(nodes_.size()) != partition_->num_intervals() + 1)
    throw InvalidArgument("SpaceTimeFunction: need N+1 node vectors");
}

SlabField SpaceTimeFunction::slabs() const {
  SlabField s{partition_, nodes_[0], {}, {}};
  for (int i = 0; i < partition_->num_intervals(); ++i) {
    const Vector& a = nodes_[i];
    const Vector& b = nodes_[i + 1];
    switch (profile_) {
      case Profile::constant_left_continuous: s.start.push_back(b); break;
      case Profile::continuous_affine: s.start.push_back(a); break;
      case Profile::average: s.start.push_back(0.5 * (a + b)); break;
    }
    s.end.push_back(b);
  }
  return s;
}

Vector SpaceTimeFunction::value(double t) const {
  if (t <= 0.0) return nodes_[0];
  const int i = partition_->interval_containing(t);
  const double s = (t - partition_->node(i)) / partition_->step(i);
  const Vector& a = nodes_[i];
  const Vector& b = nodes_[i + 1];
  switch (profile_) {
    case Profile::constant_left_continuous: return b;
    case Profile::continuous_affine: return (1.0 - s) * a + s * b;
    case Profile::average: return 0.5 * (b + (1.0 - s) * a + s * b);
  }
  return b;
}

SpaceTimeFunction reconstruct(const TimeSlabSolution& sol, Profile profile) {
  return SpaceTimeFunction(profile, sol.partition, sol.nodes, sol.space);
}

SpaceTimeFunction temporal_interpolant(const SpaceTimeFunction& v) {
  // On each interval I v = v + ((t_{i+1} - t)/tau) (v(t_i^-) - v(t_i^+)): the affine
  // function joining the left trace at t_i to the value at t_{i+1}.
  const SlabField s = v.slabs();
  std::vector<Vector> nodes{s.initial};
  for (int i = 0; i < s.num_intervals(); ++i) nodes.push_back(s.end[i]);
  return SpaceTimeFunction(Profile::continuous_affine, v.partition_ptr(), std::move(nodes), v.space());
}

ModalSolution modal_solve(const ModalProblem& problem) {
  if (!(problem.lambda > 0.0)) throw InvalidArgument("modal_solve: lambda must be positive");
  PartitionPtr partition = problem.partition ? problem.partition
                                             : std::make_shared<TimePartition>(TimePartition::uniform(problem.final_time, 1));
  SparseMatrix one(1, 1), lam(1, 1);
  one.insert(0, 0) = 1.0;
  lam.insert(0, 0) = problem.lambda;
  std::vector<Vector> loads(partition->num_intervals(), Vector::Constant(1, problem.forcing));
  ModalSolution out;
  out.discrete = implicit_euler_run(std::make_shared<SymmetricOperator>(one), std::make_shared<SymmetricOperator>(lam),
                                    partition, std::move(loads), Vector::Zero(1));
  const double lambda = problem.lambda, c = problem.forcing;
  out.exact = [lambda, c](double t) { return -c * std::expm1(-lambda * t) / lambda; };
  return out;
}

}  // namespace parest
