#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "parest/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"A posteriori error estimation experiments for the heat equation"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "path to the config file")->required();
  auto* list = app.add_subcommand("list-experiments", "list the available experiments");
  auto* schema = app.add_subcommand("schema", "print the config schema as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) return parest::run_config_file(config_path, std::cout, std::cerr);
  if (*list) {
    for (const auto& [name, description] : parest::experiment_list())
      std::cout << std::left << std::setw(22) << name << description << '\n';
    return 0;
  }
  if (*schema) {
    std::cout << parest::schema_json().dump(2) << '\n';
    return 0;
  }
  return 2;
}
