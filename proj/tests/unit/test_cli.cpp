#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "parest/errors.hpp"
#include "parest/experiments.hpp"

using namespace parest;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("parest-cli-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(const fs::path& cfg) {
  std::ostringstream out, err;
  return run_config_file(cfg.string(), out, err);
}

}  // namespace

TEST(Config, ParsesDottedKeysCommentsAndDefaults) {
  const auto c = Config::parse("# header\nexperiment = convergence_study  # trailing\n\nmesh.cells=12\nmodal.lambdas = 1, 2.5\n");
  EXPECT_EQ(c.text("experiment"), "convergence_study");
  EXPECT_EQ(c.integer("mesh.cells"), 12);
  EXPECT_EQ(c.integer("mesh.degree"), 1);
  EXPECT_TRUE(c.is_set("mesh.cells"));
  EXPECT_FALSE(c.is_set("mesh.degree"));
  EXPECT_EQ(c.line_of("mesh.cells"), 4);
  EXPECT_EQ(c.real_list("modal.lambdas"), (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(c.effective().at("threads"), "1");
}

TEST(Config, ErrorsCarryLineAndField) {
  auto expect_error = [](const std::string& text, int line, const std::string& field) {
    try {
      Config::parse(text);
      FAIL() << "no error for: " << text;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.line, line) << text;
      EXPECT_EQ(e.field, field) << text;
    }
  };
  expect_error("experiment = identity_suite\nmesh.cels = 4\n", 2, "mesh.cels");
  expect_error("experiment = identity_suite\nmesh.cells = four\n", 2, "mesh.cells");
  expect_error("experiment = identity_suite\nmesh.cells = 0\n", 2, "mesh.cells");
  expect_error("experiment = nonsense\n", 1, "experiment");
  expect_error("experiment = identity_suite\n\nthreads 4\n", 3, "");
  expect_error("experiment = identity_suite\nthreads = 2\nthreads = 3\n", 3, "threads");
  expect_error("mesh.cells = 4\n", 0, "experiment");
  expect_error("experiment = estimator_report\nestimator.theorems = Y_upper_5_1, bogus\n", 2, "estimator.theorems");
  expect_error("experiment = inefficiency_study\nmodal.lambdas = 1, -2\n", 2, "modal.lambdas");
}

TEST(Schema, ListsEveryKeyAndExperiment) {
  const auto j = schema_json();
  EXPECT_EQ(j["keys"].size(), config_schema().size());
  const auto* e = find_schema_entry("experiment");
  ASSERT_NE(e, nullptr);
  EXPECT_TRUE(e->required);
  EXPECT_EQ(e->choices.size(), experiment_list().size());
  for (const auto& [name, desc] : experiment_list())
    EXPECT_NE(std::find(e->choices.begin(), e->choices.end(), name), e->choices.end()) << name;
}

TEST(Experiments, IdentitySuitePasses) {
  const auto r = run_experiment(Config::parse("experiment = identity_suite\nmesh.cells = 3\ntime.steps = 3\nidentity.samples = 4\n"));
  EXPECT_TRUE(r.passed());
  ASSERT_EQ(r.tables.size(), 1u);
  EXPECT_EQ(r.tables[0].rows.size(), 4u);
}

TEST(Experiments, ConvergenceTableShape) {
  const auto r = run_experiment(Config::parse(
      "experiment = convergence_study\nmesh.cells = 4\ntime.steps = 4\nconvergence.levels = 4\n"
      "convergence.check_orders = false\n"));
  ASSERT_EQ(r.tables.size(), 1u);
  const auto& t = r.tables[0];
  EXPECT_EQ(t.columns, (std::vector<std::string>{"h", "tau", "error_X", "error_Y", "error_E", "eta_J", "eta_F",
                                                 "effectivity_Y", "effectivity_E"}));
  EXPECT_EQ(t.rows.size(), 4u);
  for (int col = 2; col <= 4; ++col)
    for (size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(std::stod(t.rows[i][col]), std::stod(t.rows[i - 1][col]));
  EXPECT_TRUE(r.passed());
}

TEST(Experiments, EstimatorReportLocalizedColumns) {
  const auto r = run_experiment(Config::parse(
      "experiment = estimator_report\nmesh.cells = 4\ntime.steps = 2\nproblem.data = discrete\n"
      "estimator.theorems = Y_upper_5_1, EY_5_2, energy_5_5\n"));
  ASSERT_EQ(r.tables.size(), 2u);
  EXPECT_EQ(r.tables[0].columns, (std::vector<std::string>{"cell_id", "interval_index", "eta_J_sq", "eta_F_sq", "osc_sq"}));
  EXPECT_EQ(r.tables[0].rows.size(), 8u);
  EXPECT_EQ(r.tables[1].rows.size(), 3u);
  EXPECT_TRUE(r.passed());
}

TEST(Experiments, CoarseReferenceIsAConfigError) {
  const auto dir = scratch("coarse");
  const auto cfg = write_config(dir, "experiment = estimator_report\nmesh.cells = 4\ntime.steps = 2\n"
                                     "reference.space_refine = 2\noutput.dir = " + (dir / "out").string() + "\n");
  EXPECT_EQ(run(cfg), 2);
  EXPECT_TRUE(fs::is_empty(dir / "out"));
}

TEST(Cli, MalformedConfigWritesNothing) {
  const auto dir = scratch("malformed");
  const auto out = dir / "out";
  const auto cfg = write_config(dir, "experiment = inefficiency_study\noutput.dir = " + out.string() + "\nmodal.lambdas = 1, x\n");
  EXPECT_EQ(run(cfg), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run(dir / "missing.cfg"), 2);
}

TEST(Cli, WritesManifestAndCsvAndIsDeterministic) {
  const auto dir = scratch("determinism");
  const auto out = dir / "out";
  const auto cfg = write_config(dir, "experiment = estimator_report\nmesh.cells = 3\ntime.steps = 2\nthreads = 1\n"
                                     "output.prefix = rep\noutput.dir = " + out.string() + "\n");
  ASSERT_EQ(run(cfg), 0);
  const std::string loc1 = slurp(out / "rep_localized.csv"), b1 = slurp(out / "rep_bounds.csv");
  ASSERT_EQ(run(cfg), 0);
  EXPECT_EQ(slurp(out / "rep_localized.csv"), loc1);
  EXPECT_EQ(slurp(out / "rep_bounds.csv"), b1);
  const auto manifest = nlohmann::json::parse(slurp(out / "rep_manifest.json"));
  EXPECT_EQ(manifest["experiment"], "estimator_report");
  EXPECT_EQ(manifest["passed"], true);
  EXPECT_EQ(manifest["config"]["mesh.cells"], "3");
  std::set<std::string> names;
  for (const auto& a : manifest["assertions"]) EXPECT_TRUE(names.insert(a["name"].get<std::string>()).second);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  const auto dir = scratch("threads");
  const auto cfg = write_config(dir, "experiment = estimator_report\nproblem.kind = fourier_2d\nmesh.cells = 3\n"
                                     "time.steps = 2\noutput.dir = " + (dir / "out").string() + "\n");
  ASSERT_EQ(run(cfg), 0);
  const std::string serial = slurp(dir / "out" / "estimator_report_localized.csv");
  ::setenv("PAREST_THREADS", "4", 1);
  ASSERT_EQ(run(cfg), 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "estimator_report_manifest.json"));
  EXPECT_EQ(manifest["threads"], 4);
  EXPECT_EQ(slurp(dir / "out" / "estimator_report_localized.csv"), serial);
  ::setenv("PAREST_THREADS", "zero", 1);
  EXPECT_EQ(run(cfg), 2);
  ::unsetenv("PAREST_THREADS");
}

TEST(Cli, FailedAssertionExitsWithOne) {
  const auto dir = scratch("fail");
  const auto cfg = write_config(dir, "experiment = inefficiency_study\ntolerance.inefficiency = 0\noutput.dir = " +
                                         (dir / "out").string() + "\n");
  EXPECT_EQ(run(cfg), 1);
  EXPECT_TRUE(fs::exists(dir / "out" / "inefficiency_study_manifest.json"));
}
