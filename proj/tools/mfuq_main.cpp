#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfuq/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"multi-fidelity forward uncertainty quantification driver"};
  app.require_subcommand(1);

  std::string config_path, method, out_dir;
  double budget = -1.0;
  long seed = -1;
  bool svg = false;
  CLI::App* run = app.add_subcommand("run", "run the configured methods and write diagnostics");
  run->add_option("--config", config_path, "JSON run configuration file")->required();
  run->add_option("--method", method, "misc, srbf or both (overrides the config)");
  run->add_option("--budget", budget, "evaluation cost budget (overrides the config)");
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--seed", seed, "distribution sampling seed (overrides the config)");
  run->add_flag("--svg", svg, "also write convergence plots as SVG");

  std::vector<std::string> summaries;
  long iteration = -1;
  CLI::App* cmp = app.add_subcommand("compare", "tabulate summary.json files side by side");
  cmp->add_option("summaries", summaries, "summary.json paths")->required();
  cmp->add_option("--iteration", iteration, "intermediate iteration to tabulate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      mfuq::RunOverrides ov;
      ov.method = method;
      ov.budget = budget;
      ov.out_dir = out_dir;
      ov.seed = seed;
      ov.svg = svg;
      return mfuq::run_command(config_path, ov);
    }
    return mfuq::compare_command(summaries, iteration);
  } catch (const mfuq::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
