#ifndef MDFO_METRICS_HPP
#define MDFO_METRICS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdfo/estimators.hpp"
#include "mdfo/trace.hpp"

namespace mdfo {

/// Norm of the component of the probe-estimated gradient orthogonal to the
/// column space of jacobian_q (orthonormal d x n). The probe spends
/// 2 * probe_k evaluations; callers charge them to the metrics counter, not
/// the optimization budget.
double projection_residual(const Objective& f, const Vec& x, const Mat& jacobian_q,
                           int probe_k, double delta, RngStream rng);

/// Cost of method m on problem p; nullopt = unsolved.
using EvalsToSolve = std::map<std::string, std::optional<long>>;  // problem -> cost
using MethodCosts = std::map<std::string, EvalsToSolve>;          // method -> costs

struct ProfileTable {
  std::vector<std::string> methods;
  std::vector<double> tau_grid;
  // fractions[m][t] = share of problems where method m is within tau_grid[t]
  // of the best method.
  std::vector<std::vector<double>> fractions;
};

/// Fraction of problems on which each method's cost is within tau of the
/// per-problem best. All methods must cover the same problem set.
ProfileTable performance_profile(const MethodCosts& costs, const std::vector<double>& tau_grid);

/// 50 log-spaced points from 1 to the largest observed gap.
std::vector<double> default_tau_grid(const MethodCosts& costs);

enum class ThresholdDirection { kMinimize, kMaximize };

/// Smallest cumulative evaluation count at which the trace's f crosses the
/// threshold; nullopt when it never does.
std::optional<long> evals_to_threshold(const RunTrace& trace, double threshold,
                                       ThresholdDirection direction);

/// CSV: method,tau,fraction
std::string profile_to_csv(const ProfileTable& table);

}  // namespace mdfo

#endif  // MDFO_METRICS_HPP
