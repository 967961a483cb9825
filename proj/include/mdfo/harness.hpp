#ifndef MDFO_HARNESS_HPP
#define MDFO_HARNESS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdfo/learner.hpp"
#include "mdfo/optimizers.hpp"
#include "mdfo/problems.hpp"

namespace mdfo {

inline constexpr const char* kVersion = "0.1.0";

struct ProblemSpec {
  std::string name;  // benchmark name or "synthetic"
  int dim = 0;
  int n = 0;               // synthetic only
  std::uint64_t seed = 0;  // synthetic instance seed
  double sigma = 0.0;      // additive gaussian noise level
  bool raw_encoder_init = false;

  std::string tag() const;   // directory-safe identifier
  std::string to_json() const;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::string method;  // rs | mrs | lmrs
  OptimizerConfig opt;
  LearnerConfig learner;
  std::vector<std::uint64_t> seeds;
  // Optional per-field grids: delta, k, alpha, learning_rate.
  std::map<std::string, std::vector<double>> sweep;
  std::string output_dir = "out";
  std::string x0_mode = "standard_normal";  // or "zeros"
  std::optional<double> threshold;
  bool stop_at_threshold = false;

  void validate() const;
};

/// Throws std::invalid_argument on malformed or inconsistent configs.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// One grid point of the sweep, with k/n linking already resolved
/// (by default the latent dimension follows k_m).
struct GridPoint {
  OptimizerConfig opt;
  LearnerConfig learner;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg);

/// Builds the objective for a problem; for synthetic problems also exposes
/// the planted-encoder jacobian callback.
Objective build_objective(const ProblemSpec& spec, JacobianFn* oracle_out);

/// Seed-derived standard-normal start (or zeros).
Vec make_x0(const ProblemSpec& problem, const std::string& x0_mode, std::uint64_t seed);

/// Executes all (grid point x seed) runs; writes one trace CSV, resolved
/// config JSON, summary JSON (and checkpoint for lmrs) per run under
/// output_dir/<method>/<problem>/<hash>/. Returns a process exit code:
/// 0 success, 3 runtime failure.
int run_experiment(const ExperimentConfig& cfg);

/// Per method x problem, picks the grid point with the best median criterion
/// over seeds and writes a report JSON (to out_path, or stdout when empty).
/// criterion: min_final_f | min_evals_to_threshold.
int sweep_select(const std::string& output_dir, const std::string& criterion,
                 const std::string& out_path);

/// Builds the performance-profile CSV from completed run dirs covering the
/// same problems. tau_spec: "auto", "log:<min>:<max>:<count>", or a comma
/// list of values.
int profile_command(const std::vector<std::string>& dirs, const std::string& tau_spec,
                    const std::string& out_path);

}  // namespace mdfo

#endif  // MDFO_HARNESS_HPP
