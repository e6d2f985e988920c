#include "parest/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

#include "parest/errors.hpp"
#include "parest/estimators.hpp"

namespace parest {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ tables

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw AssemblyError("csv row width does not match the header of " + name);
  rows.push_back(std::move(row));
}

std::string CsvTable::render() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += '\n';
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

bool ExperimentResult::passed() const {
  for (const auto& a : assertions)
    if (!a.passed) return false;
  return true;
}

const std::vector<std::pair<std::string, std::string>>& experiment_list() {
  static const std::vector<std::pair<std::string, std::string>> list = {
      {"identity_suite", "norm identities on random discrete space-time functions"},
      {"convergence_study", "errors and estimators under simultaneous refinement in space and time"},
      {"estimator_report", "localized estimators and both sides of every bound against a reference run"},
      {"inefficiency_study", "single-mode sweep of the jump estimator against both reconstructions"},
      {"hypercircle_check", "Pythagoras identity and jump exactness with data constant in time"}};
  return list;
}

namespace {

using Clock = std::chrono::steady_clock;

class PhaseTimer {
 public:
  explicit PhaseTimer(ExperimentResult& r) : r_(r), start_(Clock::now()) {}
  void lap(const std::string& name) {
    const auto now = Clock::now();
    r_.timings.emplace_back(name, std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  ExperimentResult& r_;
  Clock::time_point start_;
};

void check(ExperimentResult& r, const std::string& name, double value, const std::string& relation, double tol) {
  bool ok = false;
  if (relation == "<=") ok = value <= tol;
  else if (relation == ">=") ok = value >= tol;
  else if (relation == "==") ok = value == tol;
  r.assertions.push_back({name, value, tol, relation, ok && !std::isnan(value)});
}

void check_range(ExperimentResult& r, const std::string& name, double value, double lo, double hi) {
  check(r, name + " >= min", value, ">=", lo);
  check(r, name + " <= max", value, "<=", hi);
}

ManufacturedSpec problem_spec(const Config& c) {
  ManufacturedSpec s;
  const std::string kind = c.text("problem.kind");
  s.kind = kind == "fourier_2d" ? ManufacturedKind::fourier_2d
         : kind == "polynomial_in_time" ? ManufacturedKind::polynomial_in_time
                                        : ManufacturedKind::fourier_1d;
  s.kx = c.integer("problem.kx");
  s.ky = c.integer("problem.ky");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double natural = (s.kx * s.kx + (s.kind == ManufacturedKind::fourier_2d ? s.ky * s.ky : 0)) * pi2;
  s.decay = c.is_set("problem.decay") ? c.real("problem.decay") : natural;
  return s;
}

int flux_degree(const Config& c) {
  const int p = c.integer("mesh.degree");
  const int k = c.is_set("flux.degree") ? c.integer("flux.degree") : p + 1;
  if (k < p + 1)
    throw ConfigError("flux degree must be at least mesh.degree + 1", c.line_of("flux.degree"), "flux.degree");
  return k;
}

PartitionPtr make_partition(const Config& c, int steps) {
  const double T = c.real("time.final"), g = c.real("time.grading");
  return std::make_shared<TimePartition>(g == 1.0 ? TimePartition::uniform(T, steps) : TimePartition::graded(T, steps, g));
}

TimeSlabSolution solve_problem(const ManufacturedProblem& prob, SpacePtr space, PartitionPtr partition) {
  const auto data = time_mean_rhs(*prob.source(), *partition, *space);
  return implicit_euler_run(space, partition, data, initial_datum(*space, prob.initial()));
}

RieszLiftContext lift_context(SpacePtr space, int refine) {
  if (refine == 1) return RieszLiftContext(space, space, 1);
  auto lift = std::make_shared<ScalarSpace>(refine_uniform(space->mesh(), refine), space->degree());
  return RieszLiftContext(space, lift, refine);
}

double order(double e_coarse, double e_fine, double h_coarse, double h_fine) {
  return std::log(e_coarse / e_fine) / std::log(h_coarse / h_fine);
}

// ------------------------------------------------------------------ identity suite

ExperimentResult identity_suite(const Config& c) {
  ExperimentResult r;
  PhaseTimer timer(r);
  const auto prob = manufactured(problem_spec(c));
  auto space = std::make_shared<ScalarSpace>(prob.mesh(c.integer("mesh.cells")), c.integer("mesh.degree"));
  const auto partition = make_partition(c, c.integer("time.steps"));
  const auto ctx = lift_context(space, c.integer("lift.refine"));
  timer.lap("setup");

  std::mt19937_64 rng(static_cast<std::uint64_t>(c.integer("identity.seed")));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double tol = c.real("tolerance.identity");
  CsvTable t{"identities", {"sample", "ys_identity_residual", "infsup_identity_residual", "backward_ratio_over_X"}, {}};
  double worst_ys = 0.0, worst_is = 0.0, worst_back = 0.0;
  for (int s = 0; s < c.integer("identity.samples"); ++s) {
    std::vector<Vector> nodes(partition->num_intervals() + 1, Vector(space->dimension()));
    for (auto& v : nodes)
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
    const SpaceTimeFunction f(Profile::continuous_affine, partition, nodes, space);
    const double ys = ys_identity_residual(f, ctx);
    const double is = infsup_identity_residual(f, ctx);
    const double back = backward_representer(f, ctx).ratio / spacetime_norm(f, NormKind::X, ctx);
    worst_ys = std::max(worst_ys, ys);
    worst_is = std::max(worst_is, is);
    worst_back = std::max(worst_back, back);
    t.add_row({std::to_string(s), csv_number(ys), csv_number(is), csv_number(back)});
  }
  timer.lap("identities");
  check(r, "max Y_star identity residual", worst_ys, "<=", tol);
  check(r, "max inf-sup identity residual", worst_is, "<=", tol);
  check(r, "max backward representer ratio over X norm", worst_back, "<=", 1.0 + tol);
  r.tables.push_back(std::move(t));
  r.summary = {{"lift_refinement", ctx.refinement_level()}, {"dimension", space->dimension()}};
  return r;
}

// ------------------------------------------------------------------ convergence

ExperimentResult convergence_study(const Config& c) {
  ExperimentResult r;
  PhaseTimer timer(r);
  const auto prob = manufactured(problem_spec(c));
  const int levels = c.integer("convergence.levels");
  const int k = flux_degree(c);
  const ProblemData data{prob.source(), prob.initial()};
  CsvTable t{"convergence",
             {"h", "tau", "error_X", "error_Y", "error_E", "eta_J", "eta_F", "effectivity_Y", "effectivity_E"},
             {}};
  std::vector<std::array<double, 7>> rows;  // h, tau, X, Y, E, eta_J
  for (int l = 0; l < levels; ++l) {
    const int scale = 1 << l;
    auto space = std::make_shared<ScalarSpace>(prob.mesh(c.integer("mesh.cells") * scale), c.integer("mesh.degree"));
    const auto partition = make_partition(c, c.integer("time.steps") * scale);
    const auto sol = solve_problem(prob, space, partition);
    const auto ctx = lift_context(space, c.integer("lift.refine"));
    const auto U = reconstruct(sol, Profile::continuous_affine);
    const auto ubar = reconstruct(sol, Profile::average);
    const double ex = exact_error(prob, U, NormKind::X, ctx);
    const double ey = exact_error(prob, U, NormKind::Y, ctx);
    const double ee = exact_error(prob, ubar, NormKind::energy, ctx);
    const double eta_j = jump_estimator(sol).total;
    const auto fe = flux_estimators(sol, assemble_flux(sol, k));
    const double est_y = upper_estimator_Y(sol, fe, data, ctx);
    const double est_e = upper_estimator_energy(sol, fe, eta_j, data, ctx);
    const double h = space->mesh().max_diameter(), tau = partition->max_step();
    t.add_row({csv_number(h), csv_number(tau), csv_number(ex), csv_number(ey), csv_number(ee), csv_number(eta_j),
               csv_number(fe.F.total), csv_number(est_y / ey), csv_number(est_e / ee)});
    rows.push_back({h, tau, ex, ey, ee, eta_j, 0.0});
    timer.lap("level " + std::to_string(l));
  }
  const char* names[] = {"error_X", "error_Y", "error_E", "eta_J"};
  nlohmann::json orders = nlohmann::json::object();
  for (int j = 0; j < 4; ++j) {
    bool monotone = true;
    std::vector<double> o;
    for (int l = 1; l < levels; ++l) {
      monotone = monotone && rows[l][2 + j] < rows[l - 1][2 + j];
      o.push_back(order(rows[l - 1][2 + j], rows[l][2 + j], rows[l - 1][1], rows[l][1]));
    }
    orders[names[j]] = o;
    check(r, std::string(names[j]) + " decreases monotonically", monotone ? 1.0 : 0.0, "==", 1.0);
    if (c.boolean("convergence.check_orders") && j != 1)
      for (size_t l = 0; l < o.size(); ++l)
        check_range(r, std::string("order of ") + names[j] + " between levels " + std::to_string(l) + " and " +
                           std::to_string(l + 1),
                    o[l], c.real("convergence.order_min"), c.real("convergence.order_max"));
  }
  r.summary = {{"orders_in_tau", orders}, {"flux_degree", k}, {"lift_refinement", c.integer("lift.refine")}};
  r.tables.push_back(std::move(t));
  return r;
}

// ------------------------------------------------------------------ estimator report

std::vector<Theorem> requested_theorems(const Config& c) {
  std::vector<Theorem> out;
  for (const auto& name : c.text_list("estimator.theorems")) {
    if (name == "all") return all_theorems();
    out.push_back(*theorem_from_name(name));
  }
  return out;
}

ExperimentResult estimator_report_experiment(const Config& c) {
  ExperimentResult r;
  PhaseTimer timer(r);
  const auto prob = manufactured(problem_spec(c));
  auto space = std::make_shared<ScalarSpace>(prob.mesh(c.integer("mesh.cells")), c.integer("mesh.degree"));
  const auto partition = make_partition(c, c.integer("time.steps"));
  const auto sol = solve_problem(prob, space, partition);
  const bool discrete = c.text("problem.data") == "discrete";
  ReferenceOptions opt;
  opt.space_refine = c.integer("reference.space_refine");
  opt.time_refine = c.integer("reference.time_refine");
  const auto ref = discrete ? reference_solve(sol, opt) : reference_solve(prob, sol, opt);
  timer.lap("solve");
  const auto flux = assemble_flux(sol, flux_degree(c));
  timer.lap("flux");

  BoundInputs in;
  in.solution = &sol;
  in.flux = &flux;
  in.reference = &ref;
  in.allowance = c.real("tolerance.allowance");
  if (!discrete) in.data = {prob.source(), prob.initial()};
  const auto theorems = requested_theorems(c);
  const auto rep = estimator_report(in, theorems);
  timer.lap("estimators");

  const auto& mesh = space->mesh();
  const Matrix osc = rep.localized_oscillation(mesh);
  CsvTable loc{"localized", {"cell_id", "interval_index", "eta_J_sq", "eta_F_sq", "osc_sq"}, {}};
  for (int n = 0; n < sol.num_intervals(); ++n)
    for (int k = 0; k < mesh.num_cells(); ++k)
      loc.add_row({std::to_string(k), std::to_string(n), csv_number(rep.eta_J.local(k, n)),
                   csv_number(rep.flux->F.local(k, n)), csv_number(osc(k, n))});

  CsvTable bounds{"bounds",
                  {"theorem", "error", "estimator", "effectivity", "upper_bound", "satisfied", "measured_constant"},
                  {}};
  nlohmann::json details = nlohmann::json::object();
  for (const auto& b : rep.bounds) {
    bounds.add_row({b.name, csv_number(b.error), csv_number(b.estimator), csv_number(b.effectivity),
                    b.upper_bound ? "1" : "0", b.satisfied ? "1" : "0", csv_number(b.measured_constant)});
    nlohmann::json d = nlohmann::json::object();
    for (const auto& [key, v] : b.details) d[key] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    d["surrogate"] = b.surrogate;
    details[b.name] = d;
  }

  auto rel_gap = [](double total, double sum) { return total == 0.0 ? std::abs(sum) : std::abs(total * total - sum) / (total * total); };
  check(r, "eta_J localization gap", rel_gap(rep.eta_J.total, rep.eta_J.local_sum()), "<=", 1e-12);
  check(r, "eta_F localization gap", rel_gap(rep.flux->F.total, rep.flux->F.local_sum()), "<=", 1e-12);
  check(r, "patch oscillation localization gap", rel_gap(rep.osc_patch.value, osc.sum()), "<=", 1e-12);
  for (const auto& b : rep.bounds) {
    const bool guaranteed = b.theorem == Theorem::Y_upper_5_1 || b.theorem == Theorem::EY_5_2 ||
                            b.theorem == Theorem::energy_5_5;
    if (guaranteed) check(r, b.name + " error over estimator", b.error / b.estimator, "<=", 1.0 + in.allowance);
    if (b.theorem == Theorem::EY_5_2) check_range(r, "EY_5_2 equivalence ratio", b.detail("equivalence_ratio"),
                                                  1.0 / (1.0 + in.allowance), 3.0 * (1.0 + in.allowance));
  }
  r.summary = {{"eta_J", rep.eta_J.total},
               {"eta_F", rep.flux->F.total},
               {"eta_F_prime", rep.flux->F_prime.total},
               {"eta_F_double_prime", rep.flux->F_double_prime.total},
               {"osc_Y", rep.osc_Y.value},
               {"osc_X_bound", std::isfinite(rep.osc_X_bound.value) ? nlohmann::json(rep.osc_X_bound.value) : nlohmann::json(nullptr)},
               {"osc_patch", rep.osc_patch.value},
               {"osc_energy", rep.osc_energy.value},
               {"initial_term", rep.initial_term},
               {"gamma", rep.gamma},
               {"data", discrete ? "discrete" : "exact"},
               {"bound_details", details}};
  r.tables.push_back(std::move(loc));
  r.tables.push_back(std::move(bounds));
  timer.lap("report");
  return r;
}

// ------------------------------------------------------------------ inefficiency

ExperimentResult inefficiency_experiment(const Config& c) {
  ExperimentResult r;
  PhaseTimer timer(r);
  const auto s = inefficiency_study(c.real_list("modal.lambdas"));
  timer.lap("sweep");
  CsvTable t{"inefficiency", {"lambda", "error_u", "error_U", "eta_J", "ratio_u", "ratio_U", "ratio_uU"}, {}};
  for (const auto& row : s.rows)
    t.add_row({csv_number(row.lambda), csv_number(row.error_u), csv_number(row.error_U), csv_number(row.eta_J),
               csv_number(row.ratio_u), csv_number(row.ratio_U), csv_number(row.ratio_uU)});
  const double tol = c.real("tolerance.inefficiency");
  check(r, "ratio ||u - u_tau|| / ||u - U_tau|| strictly decreasing", s.ratio_strictly_decreasing ? 1.0 : 0.0, "==", 1.0);
  check(r, "||u - u_tau||_X / eta_J decreasing on the large-lambda tail", s.large_lambda_tail_decreasing ? 1.0 : 0.0, "==", 1.0);
  check(r, "||u - U_tau||_X / eta_J decreasing towards small lambda", s.small_lambda_tail_decreasing ? 1.0 : 0.0, "==", 1.0);
  check(r, "||u - u_tau||_X / eta_J at the largest lambda", s.rows.back().ratio_u, "<=", tol);
  check(r, "||u - U_tau||_X / eta_J at the smallest lambda", s.rows.front().ratio_U, "<=", tol);
  r.tables.push_back(std::move(t));
  return r;
}

// ------------------------------------------------------------------ hypercircle

struct HypercircleRow {
  std::string label;
  int space_refine = 0, time_refine = 0;
  double eu_sq = 0, eU_sq = 0, eta_sq = 0, gap = 0, residual = 0, ratio = 0;
};

/// Single-mode version: the time-discrete solution in closed form.
HypercircleRow modal_hypercircle(double lambda, const PartitionPtr& partition) {
  const auto m = modal_solve({lambda, lambda, partition->final_time(), partition});
  const double uT = m.exact(partition->final_time()), uN = m.discrete.nodes.back()[0];
  const double fin = 0.5 * (uT - uN) * (uT - uN);
  HypercircleRow row;
  row.label = "single_mode_time_discrete";
  row.eu_sq = lambda * modal_error_sq(m, Profile::constant_left_continuous) + fin;
  row.eU_sq = lambda * modal_error_sq(m, Profile::continuous_affine) + fin;
  const double eta = jump_estimator(m.discrete).total;
  row.eta_sq = eta * eta;
  row.gap = std::abs(row.eu_sq + row.eU_sq - row.eta_sq) / row.eta_sq;
  // ||u - U||_Y from u' = lambda (1 - u): int (|e'|^2/lambda + lambda e^2) dt + e(T)^2.
  const QuadratureRule rule = gauss_legendre(12);
  double y = (uT - uN) * (uT - uN);
  for (int n = 0; n < partition->num_intervals(); ++n) {
    const double tau = partition->step(n), t0 = partition->node(n);
    const double a = m.discrete.nodes[n][0], b = m.discrete.nodes[n + 1][0];
    for (int q = 0; q < rule.size(); ++q) {
      const double x = rule.points[q][0], t = t0 + x * tau;
      const double e = m.exact(t) - (a + x * (b - a));
      const double de = lambda * (1.0 - m.exact(t)) - (b - a) / tau;
      y += rule.weights[q] * tau * (de * de / lambda + lambda * e * e);
    }
  }
  row.residual = std::sqrt(y);
  row.ratio = row.residual / eta;
  return row;
}

ExperimentResult hypercircle_experiment(const Config& c) {
  ExperimentResult r;
  PhaseTimer timer(r);
  const auto spec = problem_spec(c);
  if (spec.kind == ManufacturedKind::polynomial_in_time)
    throw ConfigError("hypercircle_check needs a Fourier mode", c.line_of("problem.kind"), "problem.kind");
  ManufacturedSpec stationary = spec;
  stationary.decay = 0.0;
  const auto mode = manufactured(stationary);  // u = phi, f = lambda phi
  const double lambda = mode.f(Point(0.3, 0.4), 0.0) / mode.u(Point(0.3, 0.4), 0.0);
  auto f = make_source([mode](const Point& x, double) { return mode.f(x, 0.0); });
  const int refine = c.integer("hypercircle.space_refine");
  auto space = std::make_shared<ScalarSpace>(mode.mesh(c.integer("mesh.cells") * refine), c.integer("mesh.degree"));
  const auto partition = make_partition(c, c.integer("time.steps"));
  const auto sol = implicit_euler_run(space, partition, time_mean_rhs(*f, *partition, *space), Vector::Zero(space->dimension()));
  const auto U = reconstruct(sol, Profile::continuous_affine);
  const auto u = reconstruct(sol, Profile::constant_left_continuous);
  const double eta = jump_estimator(sol).total;
  timer.lap("solve");

  std::vector<std::pair<int, int>> refs = {{c.integer("reference.space_refine"), c.integer("reference.time_refine")}};
  if (c.boolean("hypercircle.gap_sweep"))
    for (int t : {2, 4}) refs.emplace_back(refs[0].first, refs[0].second * t);
  std::vector<HypercircleRow> rows;
  for (const auto& [sr, tr] : refs) {
    ReferenceOptions opt;
    opt.space_refine = sr;
    opt.time_refine = tr;
    const auto ref = reference_solve(sol, opt);
    HypercircleRow row;
    row.label = "reference";
    row.space_refine = sr;
    row.time_refine = tr;
    row.eu_sq = std::pow(reference_error(ref, u, NormKind::energy), 2);
    row.eU_sq = std::pow(reference_error(ref, U, NormKind::energy), 2);
    row.eta_sq = eta * eta;
    row.gap = std::abs(row.eu_sq + row.eU_sq - row.eta_sq) / row.eta_sq;
    const auto ctx = ref.coarse_context();
    row.residual = residual_dual_norm_Y(U, discrete_loads(sol, ctx), ctx);
    row.ratio = row.residual / eta;
    rows.push_back(row);
    timer.lap("reference " + std::to_string(sr) + "x" + std::to_string(tr));
  }
  rows.push_back(modal_hypercircle(lambda, partition));
  timer.lap("single mode");

  CsvTable t{"hypercircle",
             {"label", "space_refine", "time_refine", "error_E_u_sq", "error_E_U_sq", "eta_J_sq", "relative_gap",
              "residual_dual_norm", "residual_over_eta_J"},
             {}};
  for (const auto& row : rows)
    t.add_row({row.label, std::to_string(row.space_refine), std::to_string(row.time_refine), csv_number(row.eu_sq),
               csv_number(row.eU_sq), csv_number(row.eta_sq), csv_number(row.gap), csv_number(row.residual),
               csv_number(row.ratio)});
  check(r, "hypercircle relative gap against the reference", rows[0].gap, "<=", c.real("tolerance.hypercircle"));
  check(r, "|residual surrogate / eta_J - 1|", std::abs(rows[0].ratio - 1.0), "<=", c.real("tolerance.jump"));
  r.summary = {{"lambda", lambda},
               {"trial_cells_per_direction", c.integer("mesh.cells") * refine},
               {"eta_J", eta},
               {"single_mode_gap", rows.back().gap},
               {"single_mode_residual_over_eta_J", rows.back().ratio}};
  r.tables.push_back(std::move(t));
  return r;
}

int env_threads() {
  const char* v = std::getenv("PAREST_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("PAREST_THREADS must be a positive integer, got '") + v + "'");
  return static_cast<int>(n);
}

}  // namespace

ExperimentResult run_experiment(const Config& c) {
  const std::string name = c.text("experiment");
  ExperimentResult r;
  if (name == "identity_suite") r = identity_suite(c);
  else if (name == "convergence_study") r = convergence_study(c);
  else if (name == "estimator_report") r = estimator_report_experiment(c);
  else if (name == "inefficiency_study") r = inefficiency_experiment(c);
  else if (name == "hypercircle_check") r = hypercircle_experiment(c);
  else throw ConfigError("unknown experiment", c.line_of("experiment"), "experiment");
  r.experiment = name;
  return r;
}

nlohmann::json schema_json() {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& e : config_schema()) {
    nlohmann::json j = {{"key", e.key}, {"type", value_type_name(e.type)}, {"description", e.description}};
    if (!e.default_value.empty()) j["default"] = e.default_value;
    if (!e.choices.empty()) j["choices"] = e.choices;
    if (e.minimum) j["minimum"] = *e.minimum;
    if (e.required) j["required"] = true;
    keys.push_back(j);
  }
  return {{"format", "one 'key = value' per line; '#' starts a comment; lists are comma separated"},
          {"environment", {{"PAREST_THREADS", "overrides the threads key"}}},
          {"keys", keys}};
}

nlohmann::json make_manifest(const Config& c, const ExperimentResult& r, int threads, const std::vector<std::string>& files) {
  nlohmann::json assertions = nlohmann::json::array();
  for (const auto& a : r.assertions)
    assertions.push_back({{"name", a.name},
                          {"value", std::isfinite(a.value) ? nlohmann::json(a.value) : nlohmann::json(nullptr)},
                          {"relation", a.relation},
                          {"tolerance", a.tolerance},
                          {"passed", a.passed}});
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& [k, v] : r.timings) timing[k] = v;
  nlohmann::json tolerances = nlohmann::json::object();
  for (const auto& [k, v] : c.effective())
    if (k.rfind("tolerance.", 0) == 0) tolerances[k.substr(10)] = v;
  return {{"experiment", r.experiment},
          {"version", kVersion},
          {"threads", threads},
          {"config", c.effective()},
          {"tolerances", tolerances},
          {"timing_seconds", timing},
          {"assertions", assertions},
          {"passed", r.passed()},
          {"summary", r.summary},
          {"outputs", files}};
}

int run_config_file(const std::string& path, std::ostream& out, std::ostream& err) {
  Config config;
  fs::path dir;
  std::string prefix;
  int threads = 1;
  try {
    config = Config::load(path);
    threads = config.integer("threads");
    if (const int t = env_threads()) threads = t;
    dir = config.text("output.dir");
    prefix = config.is_set("output.prefix") ? config.text("output.prefix") : config.text("experiment");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
      throw ConfigError("output directory is not writable: " + dir.string(), config.line_of("output.dir"), "output.dir");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  set_num_threads(threads);

  ExperimentResult result;
  try {
    result = run_experiment(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const RefinementError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return 1;
  }

  std::vector<std::string> files;
  for (const auto& t : result.tables) files.push_back(prefix + "_" + t.name + ".csv");
  files.push_back(prefix + "_manifest.json");
  try {
    for (size_t i = 0; i < result.tables.size(); ++i) {
      std::ofstream f(dir / files[i], std::ios::binary);
      f << result.tables[i].render();
      if (!f) throw std::runtime_error("cannot write " + (dir / files[i]).string());
    }
    std::ofstream m(dir / files.back(), std::ios::binary);
    m << make_manifest(config, result, threads, files).dump(2) << '\n';
    if (!m) throw std::runtime_error("cannot write " + (dir / files.back()).string());
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return 1;
  }

  for (const auto& a : result.assertions)
    out << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << csv_number(a.value) << ' ' << a.relation << ' '
        << csv_number(a.tolerance) << '\n';
  out << (result.passed() ? "all assertions passed" : "some assertions failed") << "; outputs in " << dir.string() << '\n';
  return result.passed() ? 0 : 1;
}

}  // namespace parest
