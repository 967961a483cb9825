#ifndef MDFO_ESTIMATORS_HPP
#define MDFO_ESTIMATORS_HPP

#include <optional>
#include <stdexcept>
#include <vector>

#include "mdfo/linalg.hpp"
#include "mdfo/problems.hpp"
#include "mdfo/rng.hpp"

namespace mdfo {

/// Raised when the objective returns a non-finite value; carries the point.
struct NonFiniteValueError : std::runtime_error {
  NonFiniteValueError(std::string msg, Vec offending_point)
      : std::runtime_error(std::move(msg)), point(std::move(offending_point)) {}
  Vec point;
};

/// One antithetic query: y = F(x + delta*u) - F(x - delta*u) along unit u.
struct EvaluationRecord {
  Vec x;
  Vec u;
  double y = 0.0;
  double delta = 0.0;
  long iteration = 0;
};

struct GradientEstimate {
  Vec g;
  std::vector<Vec> lifted_directions;  // unit norm, dim d; always all k pairs
  std::vector<double> y_values;        // one per pair
  double delta = 0.0;
  int evals_used = 0;                  // exactly 2k
  int dim_scale = 0;                   // d for the full-space estimator, n_eff otherwise
  bool fallback_full_space = false;    // manifold call degenerated to full space
  std::vector<int> kept_indices;       // pairs that entered g (all unless top_b)
  double f_mean = 0.0;                 // mean of the 2k function values
};

struct EstimatorOptions {
  /// Paper-literal sum over the k pairs instead of the mean.
  bool sum_mode = false;
  /// Keep only the pairs with the largest |y| when forming g. The full
  /// direction/value lists are still reported so callers can log them.
  std::optional<int> top_b;
};

/// Antithetic full-space estimator: directions uniform on the unit sphere,
/// g = (d / 2 delta) * mean_i y_i s_i. Performs exactly 2k evaluations, each
/// with an independently derived noise seed.
GradientEstimate grad_est(const Objective& f, const Vec& x, double delta, int k,
                          RngStream rng, const EstimatorOptions& opt = {});

/// Tangent-space estimator: jacobian is d(encoder)/dx laid out n x d; its
/// transpose is orthonormalized and directions are sampled on the
/// n_eff-sphere, then lifted. Scale uses n_eff, so rank-deficient jacobians
/// stay consistent. A zero jacobian falls back to grad_est and sets the flag.
GradientEstimate manifold_grad_est(const Objective& f, const Vec& x, const Mat& jacobian,
                                   double delta, int k, RngStream rng,
                                   const EstimatorOptions& opt = {});

/// (beta k_e / (k_e + k_m)) g_e + ((1 - beta) k_m / (k_e + k_m)) g_m.
Vec mix_gradients(const GradientEstimate& g_e, const GradientEstimate& g_m, double beta);

/// Records for the learner: one per direction pair, sharing the iterate.
std::vector<EvaluationRecord> to_records(const Vec& x, const GradientEstimate& est,
                                         long iteration);

}  // namespace mdfo

#endif  // MDFO_ESTIMATORS_HPP
