#include "mdfo/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "mdfo/parallel.hpp"

namespace mdfo {

namespace {

void check_common(const Objective& f, const Vec& x, double delta, int k) {
  if (!(delta > 0.0)) throw std::invalid_argument("estimator: delta must be > 0");
  if (k < 1) throw std::invalid_argument("estimator: k must be >= 1");
  if (static_cast<int>(x.size()) != f.dim())
    throw std::invalid_argument("estimator: x dimension does not match objective");
}

// Evaluates the 2k antithetic points (order: +dir0, -dir0, +dir1, ...).
// Evaluations may run in parallel; values land in index order, so the
// result does not depend on completion order.
std::vector<double> antithetic_values(const Objective& f, const Vec& x, double delta,
                                      const std::vector<Vec>& dirs, RngStream noise_rng) {
  const int k = static_cast<int>(dirs.size());
  std::vector<Vec> points(static_cast<std::size_t>(2 * k));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(2 * k));
  for (int i = 0; i < k; ++i) {
    Vec plus = x;
    Vec minus = x;
    axpy(delta, dirs[static_cast<std::size_t>(i)], plus);
    axpy(-delta, dirs[static_cast<std::size_t>(i)], minus);
    points[static_cast<std::size_t>(2 * i)] = std::move(plus);
    points[static_cast<std::size_t>(2 * i + 1)] = std::move(minus);
    seeds[static_cast<std::size_t>(2 * i)] = noise_rng.next_u64();
    seeds[static_cast<std::size_t>(2 * i + 1)] = noise_rng.next_u64();
  }
  std::vector<double> values(static_cast<std::size_t>(2 * k));
  parallel_for(2 * k, [&](int j) {
    values[static_cast<std::size_t>(j)] =
        f.eval(points[static_cast<std::size_t>(j)], seeds[static_cast<std::size_t>(j)]);
  });
  for (int j = 0; j < 2 * k; ++j) {
    if (!std::isfinite(values[static_cast<std::size_t>(j)]))
      throw NonFiniteValueError("objective returned a non-finite value",
                                points[static_cast<std::size_t>(j)]);
  }
  return values;
}

std::vector<int> select_pairs(const std::vector<double>& ys, const std::optional<int>& top_b) {
  const int k = static_cast<int>(ys.size());
  std::vector<int> kept(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) kept[static_cast<std::size_t>(i)] = i;
  if (!top_b.has_value() || *top_b >= k) return kept;
  if (*top_b < 1) throw std::invalid_argument("top_b must be >= 1");
  std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) {
    return std::abs(ys[static_cast<std::size_t>(a)]) > std::abs(ys[static_cast<std::size_t>(b)]);
  });
  kept.resize(static_cast<std::size_t>(*top_b));
  std::sort(kept.begin(), kept.end());
  return kept;
}

GradientEstimate assemble(const Vec& x, double delta, int dim_scale,
                          std::vector<Vec> dirs, std::vector<double> values,
                          const EstimatorOptions& opt) {
  const int k = static_cast<int>(dirs.size());
  GradientEstimate est;
  est.delta = delta;
  est.evals_used = 2 * k;
  est.dim_scale = dim_scale;
  est.y_values.resize(static_cast<std::size_t>(k));
  double fsum = 0.0;
  for (int i = 0; i < k; ++i) {
    est.y_values[static_cast<std::size_t>(i)] =
        values[static_cast<std::size_t>(2 * i)] - values[static_cast<std::size_t>(2 * i + 1)];
    fsum += values[static_cast<std::size_t>(2 * i)] + values[static_cast<std::size_t>(2 * i + 1)];
  }
  est.f_mean = fsum / static_cast<double>(2 * k);
  est.kept_indices = select_pairs(est.y_values, opt.top_b);

  est.g.assign(x.size(), 0.0);
  for (int i : est.kept_indices)
    axpy(est.y_values[static_cast<std::size_t>(i)], dirs[static_cast<std::size_t>(i)], est.g);
  const double denom = opt.sum_mode ? 1.0 : static_cast<double>(est.kept_indices.size());
  scale(est.g, static_cast<double>(dim_scale) / (2.0 * delta * denom));
  est.lifted_directions = std::move(dirs);
  return est;
}

}  // namespace

GradientEstimate grad_est(const Objective& f, const Vec& x, double delta, int k,
                          RngStream rng, const EstimatorOptions& opt) {
  check_common(f, x, delta, k);
  RngStream dir_rng = rng.derive(0);
  RngStream noise_rng = rng.derive(1);
  const int d = f.dim();
  std::vector<Vec> dirs;
  dirs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) dirs.push_back(sample_unit_sphere(d, dir_rng));
  std::vector<double> values = antithetic_values(f, x, delta, dirs, noise_rng);
  return assemble(x, delta, d, std::move(dirs), std::move(values), opt);
}

GradientEstimate manifold_grad_est(const Objective& f, const Vec& x, const Mat& jacobian,
                                   double delta, int k, RngStream rng,
                                   const EstimatorOptions& opt) {
  check_common(f, x, delta, k);
  if (jacobian.cols != f.dim() || jacobian.rows < 1)
    throw std::invalid_argument("manifold_grad_est: jacobian must be n x d");
  const GramSchmidtResult gs = gram_schmidt(transpose(jacobian));
  if (gs.n_eff == 0) {
    GradientEstimate est = grad_est(f, x, delta, k, rng, opt);
    est.fallback_full_space = true;
    return est;
  }
  RngStream dir_rng = rng.derive(0);
  RngStream noise_rng = rng.derive(1);
  std::vector<Vec> dirs;
  dirs.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const Vec s = sample_unit_sphere(gs.n_eff, dir_rng);
    dirs.push_back(matvec(gs.q, s));
  }
  std::vector<double> values = antithetic_values(f, x, delta, dirs, noise_rng);
  return assemble(x, delta, gs.n_eff, std::move(dirs), std::move(values), opt);
}

Vec mix_gradients(const GradientEstimate& g_e, const GradientEstimate& g_m, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::invalid_argument("mix_gradients: beta must be in [0, 1]");
  if (g_e.g.size() != g_m.g.size())
    throw std::invalid_argument("mix_gradients: dimension mismatch");
  const double k_e = static_cast<double>(g_e.y_values.size());
  const double k_m = static_cast<double>(g_m.y_values.size());
  const double total = k_e + k_m;
  Vec g(g_e.g.size(), 0.0);
  axpy(beta * k_e / total, g_e.g, g);
  axpy((1.0 - beta) * k_m / total, g_m.g, g);
  return g;
}

std::vector<EvaluationRecord> to_records(const Vec& x, const GradientEstimate& est,
                                         long iteration) {
  std::vector<EvaluationRecord> records;
  records.reserve(est.y_values.size());
  for (std::size_t i = 0; i < est.y_values.size(); ++i) {
    records.push_back(EvaluationRecord{x, est.lifted_directions[i], est.y_values[i],
                                       est.delta, iteration});
  }
  return records;
}

}  // namespace mdfo
