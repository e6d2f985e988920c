#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "parest/assembly.hpp"

namespace parest {

/// Time nodes 0 = t_0 < ... < t_N = T. Interval i (0-based) is (t_i, t_{i+1}].
class TimePartition {
 public:
  explicit TimePartition(std::vector<double> nodes);
  static TimePartition uniform(double T, int N);
  /// t_n = T (n/N)^grading.
  static TimePartition graded(double T, int N, double grading);

  int num_intervals() const { return static_cast<int>(nodes_.size()) - 1; }
  double node(int n) const { return nodes_[n]; }
  double step(int i) const { return nodes_[i + 1] - nodes_[i]; }
  double final_time() const { return nodes_.back(); }
  double max_step() const;
  const std::vector<double>& nodes() const { return nodes_; }

  /// Every interval split into `factor` equal parts.
  TimePartition refine(int factor) const;
  /// Partition of the reversed time s = T - t.
  TimePartition reversed() const;
  /// Interval containing t under the left-continuous convention; t = 0 maps to interval 0.
  int interval_containing(double t) const;
  /// Parent interval of every interval of this partition inside `coarse`; throws RefinementError if not nested.
  std::vector<int> parents_in(const TimePartition& coarse) const;

 private:
  std::vector<double> nodes_;
};

using PartitionPtr = std::shared_ptr<const TimePartition>;

/// Right-hand side data f(x, t).
class Source {
 public:
  virtual ~Source() = default;
  /// False for data only available as a functional (no pointwise values).
  virtual bool is_l2() const { return true; }
  virtual double value(const Point& x, double t) const = 0;
  /// Load vector (f(t), phi_i) on the free dofs of `space`.
  virtual Vector load(const ScalarSpace& space, double t) const;
};

using SourcePtr = std::shared_ptr<const Source>;

class FunctionSource final : public Source {
 public:
  explicit FunctionSource(std::function<double(const Point&, double)> fn) : fn_(std::move(fn)) {}
  double value(const Point& x, double t) const override { return fn_(x, t); }

 private:
  std::function<double(const Point&, double)> fn_;
};

/// Data known only through its action on test functions.
class FunctionalSource final : public Source {
 public:
  explicit FunctionalSource(std::function<Vector(const ScalarSpace&, double)> fn) : fn_(std::move(fn)) {}
  bool is_l2() const override { return false; }
  double value(const Point&, double) const override;
  Vector load(const ScalarSpace& space, double t) const override { return fn_(space, t); }

 private:
  std::function<Vector(const ScalarSpace&, double)> fn_;
};

/// Piecewise constant in time, broken polynomial in space.
class DiscreteSource final : public Source {
 public:
  DiscreteSource(PartitionPtr partition, std::vector<CellField> fields);
  double value(const Point& x, double t) const override;
  Vector load(const ScalarSpace& space, double t) const override;
  const TimePartition& partition() const { return *partition_; }
  const std::vector<CellField>& fields() const { return fields_; }

 private:
  PartitionPtr partition_;
  std::vector<CellField> fields_;
  std::shared_ptr<CellLocator> locator_;
};

SourcePtr make_source(std::function<double(const Point&, double)> fn);
SourcePtr zero_source();

/// Mean value in time on each interval, then elementwise L2 projection to P_p.
struct DiscreteData {
  std::vector<CellField> fields;  // empty for functional-only data
  std::vector<Vector> loads;      // free-dof load vector per interval
};

/// Gauss points per interval used for temporal mean values of general data.
inline constexpr int kTimeMeanPoints = 16;

DiscreteData time_mean_rhs(const Source& f, const TimePartition& partition, const ScalarSpace& space);

enum class InitialProjection { l2, nodal };
Vector initial_datum(const ScalarSpace& space, const SpatialFunction& u0, InitialProjection kind = InitialProjection::l2);

struct TimeSlabSolution {
  SpacePtr space;  // null for single-mode runs
  PartitionPtr partition;
  std::shared_ptr<const SymmetricOperator> mass;
  std::shared_ptr<const SymmetricOperator> stiffness;
  std::vector<Vector> nodes;        // u_0 .. u_N
  std::vector<Vector> loads;        // b_n per interval
  std::vector<CellField> source;    // f_{h,tau} per interval when available
  double max_step_residual = 0.0;

  int num_intervals() const { return partition->num_intervals(); }
};

TimeSlabSolution implicit_euler_run(std::shared_ptr<const SymmetricOperator> mass,
                                    std::shared_ptr<const SymmetricOperator> stiffness, PartitionPtr partition,
                                    std::vector<Vector> loads, const Vector& u0);

TimeSlabSolution implicit_euler_run(SpacePtr space, PartitionPtr partition, const DiscreteData& rhs, const Vector& u0,
                                    Execution exec = Execution::parallel);

/// Piecewise affine-in-time field stored slab by slab; covers every profile and
/// differences of profiles. Vectors share one coefficient space.
struct SlabField {
  PartitionPtr partition;
  Vector initial;
  std::vector<Vector> start;  // value at t_i^+
  std::vector<Vector> end;    // value at t_{i+1}

  int num_intervals() const { return static_cast<int>(start.size()); }
  Vector value(double t) const;
  Vector final_value() const { return end.back(); }
  /// Time derivative on interval i.
  Vector derivative(int i) const;
  /// True when every start matches the preceding end (and the first matches the initial value).
  bool is_continuous(double tol = 0.0) const;

  SlabField operator-(const SlabField& other) const;
  SlabField operator+(const SlabField& other) const;
  SlabField operator*(double c) const;
};

/// Express a slab field on a nested finer partition with coefficients mapped by `prolong`.
SlabField refine_slabs(const SlabField& coarse, const SparseMatrix& prolong, PartitionPtr fine);
SlabField refine_slabs(const SlabField& coarse, PartitionPtr fine);

enum class Profile { constant_left_continuous, continuous_affine, average };

const char* profile_name(Profile p);

class SpaceTimeFunction {
 public:
  SpaceTimeFunction(Profile profile, PartitionPtr partition, std::vector<Vector> nodes, SpacePtr space = nullptr);

  Profile profile() const { return profile_; }
  const TimePartition& partition() const { return *partition_; }
  const PartitionPtr& partition_ptr() const { return partition_; }
  const SpacePtr& space() const { return space_; }
  const std::vector<Vector>& nodes() const { return nodes_; }

  Vector value(double t) const;
  SlabField slabs() const;

 private:
  Profile profile_;
  PartitionPtr partition_;
  std::vector<Vector> nodes_;
  SpacePtr space_;
};

SpaceTimeFunction reconstruct(const TimeSlabSolution& sol, Profile profile);
SpaceTimeFunction temporal_interpolant(const SpaceTimeFunction& v);

struct ModalProblem {
  double lambda = 1.0;
  double forcing = 1.0;
  double final_time = 1.0;
  PartitionPtr partition;
};

struct ModalSolution {
  TimeSlabSolution discrete;
  std::function<double(double)> exact;
};

ModalSolution modal_solve(const ModalProblem& problem);

}  // namespace parest
