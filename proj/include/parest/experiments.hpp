#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "parest/config.hpp"

namespace parest {

inline constexpr const char* kVersion = "1.0.0";

struct Assertion {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  // how value is compared with tolerance, e.g. "<="
  bool passed = false;
};

/// Plot-ready table; numbers are rendered with 17 significant digits.
struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string render() const;
};

std::string csv_number(double v);

struct ExperimentResult {
  std::string experiment;
  std::vector<CsvTable> tables;
  std::vector<Assertion> assertions;
  std::vector<std::pair<std::string, double>> timings;  // seconds per phase
  nlohmann::json summary = nlohmann::json::object();

  bool passed() const;
};

/// Name and one-line description of every experiment.
const std::vector<std::pair<std::string, std::string>>& experiment_list();

/// Runs the configured experiment without touching the file system.
ExperimentResult run_experiment(const Config& config);

/// Manifest of a finished run.
nlohmann::json make_manifest(const Config& config, const ExperimentResult& result, int threads,
                             const std::vector<std::string>& files);

/// JSON description of the configuration keys.
nlohmann::json schema_json();

/// Loads, runs and writes outputs. Returns the process exit status: 0 when every assertion
/// passed, 1 on a failed assertion or computation, 2 on a configuration error. Nothing is
/// written unless the run completes.
int run_config_file(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace parest
