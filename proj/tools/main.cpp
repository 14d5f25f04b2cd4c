#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "collapse/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"collapse-lab: reproducible experiments on collapse dynamics"};
  app.require_subcommand(1);
  std::string config;
  auto* run = app.add_subcommand("run", "Validate a config, run the experiment and write its results");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  auto* verify = app.add_subcommand("verify", "Validate a config without writing anything");
  verify->add_option("config", config, "Experiment config (JSON)")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : collapse::cli::kValidationFailure;
  }
  if (run->parsed()) return collapse::cli::run(config, std::cout, std::cerr);
  return collapse::cli::verify(config, std::cout, std::cerr);
}
