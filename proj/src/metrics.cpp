#include "mdfo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdfo {

double projection_residual(const Objective& f, const Vec& x, const Mat& jacobian_q,
                           int probe_k, double delta, RngStream rng) {
  if (probe_k < 1) throw std::invalid_argument("projection_residual: probe_k must be >= 1");
  const GradientEstimate est = grad_est(f, x, delta, probe_k, rng);
  if (jacobian_q.rows != static_cast<int>(x.size()))
    throw std::invalid_argument("projection_residual: jacobian_q must be d x n");
  const Vec coeffs = mat_t_vec(jacobian_q, est.g);
  Vec residual = est.g;
  axpy(-1.0, matvec(jacobian_q, coeffs), residual);
  return norm2(residual);
}

ProfileTable performance_profile(const MethodCosts& costs, const std::vector<double>& tau_grid) {
  if (costs.empty()) throw std::invalid_argument("performance_profile: no methods");
  const EvalsToSolve& first = costs.begin()->second;
  if (first.empty()) throw std::invalid_argument("performance_profile: empty problem set");
  for (const auto& [method, table] : costs) {
    if (table.size() != first.size())
      throw std::invalid_argument("performance_profile: problem sets differ across methods");
    for (const auto& [problem, cost] : table)
      if (first.find(problem) == first.end())
        throw std::invalid_argument("performance_profile: problem sets differ across methods");
  }

  // Best (finite) cost per problem; methods that never solve never count.
  std::map<std::string, double> best;
  for (const auto& [problem, cost] : first) best[problem] = std::numeric_limits<double>::infinity();
  for (const auto& [method, table] : costs)
    for (const auto& [problem, cost] : table)
      if (cost.has_value())
        best[problem] = std::min(best[problem], static_cast<double>(*cost));

  ProfileTable out;
  out.tau_grid = tau_grid;
  const double n_problems = static_cast<double>(first.size());
  for (const auto& [method, table] : costs) {
    out.methods.push_back(method);
    std::vector<double> row;
    row.reserve(tau_grid.size());
    for (double tau : tau_grid) {
      int hits = 0;
      for (const auto& [problem, cost] : table) {
        if (!cost.has_value()) continue;
        if (static_cast<double>(*cost) - best[problem] <= tau) ++hits;
      }
      row.push_back(static_cast<double>(hits) / n_problems);
    }
    out.fractions.push_back(std::move(row));
  }
  return out;
}

std::vector<double> default_tau_grid(const MethodCosts& costs) {
  std::map<std::string, double> best;
  for (const auto& [method, table] : costs)
    for (const auto& [problem, cost] : table)
      if (cost.has_value()) {
        auto it = best.find(problem);
        if (it == best.end() || static_cast<double>(*cost) < it->second)
          best[problem] = static_cast<double>(*cost);
      }
  double max_gap = 1.0;
  for (const auto& [method, table] : costs)
    for (const auto& [problem, cost] : table) {
      if (!cost.has_value()) continue;
      auto it = best.find(problem);
      if (it != best.end())
        max_gap = std::max(max_gap, static_cast<double>(*cost) - it->second);
    }
  const int points = 50;
  const double log_max = std::log(std::max(max_gap, 1.0));
  std::vector<double> grid;
  grid.reserve(points);
  for (int i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / (points - 1);
    grid.push_back(std::exp(t * log_max));
  }
  return grid;
}

std::optional<long> evals_to_threshold(const RunTrace& trace, double threshold,
                                       ThresholdDirection direction) {
  if (trace.rows.empty()) throw std::invalid_argument("evals_to_threshold: empty trace");
  for (const TraceRow& row : trace.rows) {
    const bool crossed = direction == ThresholdDirection::kMinimize ? row.f <= threshold
                                                                    : row.f >= threshold;
    if (crossed) return row.evals;
  }
  return std::nullopt;
}

std::string profile_to_csv(const ProfileTable& table) {
  std::string out = "method,tau,fraction\n";
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    for (std::size_t t = 0; t < table.tau_grid.size(); ++t) {
      out += table.methods[m];
      out.push_back(',');
      out += format_double(table.tau_grid[t]);
      out.push_back(',');
      out += format_double(table.fractions[m][t]);
      out.push_back('\n');
    }
  }
  return out;
}

}  // namespace mdfo
