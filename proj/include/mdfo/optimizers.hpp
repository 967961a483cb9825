#ifndef MDFO_OPTIMIZERS_HPP
#define MDFO_OPTIMIZERS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "mdfo/estimators.hpp"
#include "mdfo/learner.hpp"
#include "mdfo/trace.hpp"

namespace mdfo {

struct OptimizerConfig {
  double alpha = 1e-2;  // step size
  double delta = 1e-2;  // smoothing radius
  int k_e = 0;          // exploration direction pairs per iteration
  int k_m = 0;          // manifold direction pairs per iteration
  /// Exploration weight; nullopt resolves to 1/d at runtime.
  std::optional<double> beta;
  long max_evals = 10000;
  double stop_grad_tol = 0.0;
  int stop_window = 0;  // 0 disables the stationarity stop
  /// Keep only the direction pairs with largest |y| when forming the step.
  std::optional<int> top_b;
  /// Divide alpha by the standard deviation of the kept y values.
  bool step_std_scaling = false;
  /// Paper-literal sum over direction pairs in the estimators.
  bool estimator_sum_mode = false;
  /// Stop as soon as the trace f crosses this value (minimization).
  std::optional<double> stop_threshold;
  /// Latent dimension of the learned manifold; 0 means k_m.
  int manifold_dim = 0;
  /// Probe the projection residual every this many iterations (0 = off).
  int metrics_every = 0;
  int metrics_probe_k = 2000;
  /// Fill the wall_ms column. Off by default: timing cells would break
  /// byte-identical reruns.
  bool record_wall_time = false;
};

enum class StopReason { kMaxEvals, kStationary, kThreshold, kNonFinite };

struct RunResult {
  Vec x_final;
  RunTrace trace;
  StopReason stop = StopReason::kMaxEvals;
  long iterations = 0;
  long budget_evals = 0;   // evaluations charged to the optimization budget
  long metrics_evals = 0;  // probe + logging evaluations, tracked separately
  std::string error;       // non-empty only for kNonFinite
  long learner_degrade_count = 0;
  long reinit_count = 0;
  long fallback_count = 0;  // manifold estimator fell back to full space
};

struct LmrsResult {
  RunResult run;
  ManifoldModel model;
  RngState learner_rng_state;  // solver stream position at run end
};

/// x <- x - alpha * g with the full-space antithetic estimator.
RunResult random_search(const Objective& f, const Vec& x0, const OptimizerConfig& cfg,
                        RngStream rng);

using JacobianFn = std::function<Mat(const Vec&)>;

/// Same loop with directions lifted through the oracle tangent basis.
RunResult manifold_random_search(const Objective& f, const Vec& x0,
                                 const JacobianFn& oracle_jacobian,
                                 const OptimizerConfig& cfg, RngStream rng);

/// Joint loop: mixes exploration and learned-manifold estimates, feeds every
/// antithetic pair to the online learner, re-solves periodically, and
/// reinitializes the model when the mixed gradient collapses.
LmrsResult lmrs(const Objective& f, const Vec& x0, const OptimizerConfig& cfg,
                const LearnerConfig& lcfg, RngStream rng);

/// True when the median gradient-norm estimate over the window is below
/// stop_grad_tol or the relative f decrease across the window is below 1e-8.
bool stationarity_check(std::span<const double> grad_norms, std::span<const double> f_values,
                        double stop_grad_tol);

}  // namespace mdfo

#endif  // MDFO_OPTIMIZERS_HPP
