// Command-line front end: single runs and sweeps, sweep selection, and
// performance-profile generation. See README.md for config examples.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdfo/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"manifold-dfo: derivative-free optimization with online manifold learning"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Execute all runs described by a config file");
  run->add_option("--config", config_path, "JSON config file")->required();

  std::string sweep_dir;
  std::string criterion = "min_final_f";
  std::string sweep_out;
  CLI::App* select = app.add_subcommand("sweep-select", "Pick the best grid point per method/problem");
  select->add_option("--dir", sweep_dir, "Output directory of a completed sweep")->required();
  select->add_option("--criterion", criterion, "min_final_f or min_evals_to_threshold");
  select->add_option("--out", sweep_out, "Report file (default: stdout)");

  std::string dirs_arg;
  std::string tau_spec = "auto";
  std::string profile_out;
  CLI::App* profile = app.add_subcommand("profile", "Performance profiles across methods");
  profile->add_option("--dirs", dirs_arg, "Comma-separated run directories (>= 2 methods)")
      ->required();
  profile->add_option("--tau-grid", tau_spec, "auto, log:<min>:<max>:<count>, or values");
  profile->add_option("--out", profile_out, "CSV file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      mdfo::ExperimentConfig cfg;
      try {
        cfg = mdfo::load_config_file(config_path);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      return mdfo::run_experiment(cfg);
    }
    if (select->parsed()) {
      return mdfo::sweep_select(sweep_dir, criterion, sweep_out);
    }
    if (profile->parsed()) {
      std::vector<std::string> dirs;
      std::string token;
      for (char c : dirs_arg) {
        if (c == ',') {
          if (!token.empty()) dirs.push_back(token);
          token.clear();
        } else {
          token.push_back(c);
        }
      }
      if (!token.empty()) dirs.push_back(token);
      return mdfo::profile_command(dirs, tau_spec, profile_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
