#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdfo/estimators.hpp"
#include "test_helpers.hpp"

using namespace mdfo;
using namespace mdfo::testing;

namespace {

Objective linear_objective(const Vec& v) {
  return Objective(static_cast<int>(v.size()), "linear",
                   [v](const Vec& x, std::uint64_t) { return dot(v, x); });
}

Objective constant_objective(int dim, double c) {
  return Objective(dim, "constant", [c](const Vec&, std::uint64_t) { return c; });
}

// Mean of N independent estimates, with a per-coordinate 3-standard-error
// band around the target.
void check_mean_recovers(const Objective& f, const Vec& x, const Vec& target, int n_estimates,
                         std::uint64_t seed,
                         const std::function<GradientEstimate(RngStream)>& estimate) {
  const std::size_t d = x.size();
  Vec mean(d, 0.0);
  Vec m2(d, 0.0);
  RngStream rng(seed);
  for (int i = 0; i < n_estimates; ++i) {
    const GradientEstimate est = estimate(rng.derive(static_cast<std::uint64_t>(i)));
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += est.g[j];
      m2[j] += est.g[j] * est.g[j];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    mean[j] /= n_estimates;
    const double var = m2[j] / n_estimates - mean[j] * mean[j];
    const double se = std::sqrt(std::max(var, 0.0) / n_estimates);
    CHECK(std::abs(mean[j] - target[j]) < 3.0 * se + 1e-12);
  }
  (void)f;
}

}  // namespace

TEST_CASE("constant objective yields an exactly zero estimate") {
  const Objective f = constant_objective(7, 4.2);
  RngStream rng(1);
  const GradientEstimate est = grad_est(f, Vec(7, 0.5), 0.1, 3, rng);
  for (double g : est.g) CHECK(g == 0.0);
  CHECK(est.evals_used == 6);
  CHECK(est.y_values.size() == 3);
  CHECK(est.lifted_directions.size() == 3);
  for (const Vec& u : est.lifted_directions) CHECK(std::abs(norm2(u) - 1.0) < 1e-10);
}

TEST_CASE("even objective at its center cancels exactly") {
  const Objective f = make_benchmark("sphere", 6);
  RngStream rng(2);
  const GradientEstimate est = grad_est(f, Vec(6, 0.0), 0.05, 5, rng);
  CHECK(norm2(est.g) < 1e-12);
}

TEST_CASE("single-pair estimate of a linear function has the closed form") {
  RngStream init(3);
  const Vec v = random_vec(5, init);
  const Objective f = linear_objective(v);
  RngStream rng(4);
  const GradientEstimate est = grad_est(f, random_vec(5, init), 0.1, 1, rng);
  // g = d * (v^T s) * s for the single direction s.
  const Vec& s = est.lifted_directions[0];
  const double coef = 5.0 * dot(v, s);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(est.g[i] == doctest::Approx(coef * s[i]).epsilon(1e-9));
}

TEST_CASE("full-space estimator is unbiased on a linear function") {
  RngStream init(5);
  const Vec v = random_vec(8, init);
  const Objective f = linear_objective(v);
  const Vec x = random_vec(8, init);
  check_mean_recovers(f, x, v, 20000, 6, [&](RngStream rng) {
    return grad_est(f, x, 0.1, 1, rng);
  });
}

TEST_CASE("evaluation accounting matches the objective counter exactly") {
  const Objective f = make_benchmark("rastrigin", 5);
  RngStream rng(7);
  const std::uint64_t before = f.eval_count();
  const GradientEstimate e1 = grad_est(f, Vec(5, 0.3), 0.05, 4, rng);
  CHECK(f.eval_count() - before == static_cast<std::uint64_t>(e1.evals_used));
  const std::uint64_t mid = f.eval_count();
  Mat jac(2, 5);
  jac.at(0, 0) = 1.0;
  jac.at(1, 1) = 1.0;
  const GradientEstimate e2 = manifold_grad_est(f, Vec(5, 0.3), jac, 0.05, 3, rng);
  CHECK(f.eval_count() - mid == static_cast<std::uint64_t>(e2.evals_used));
  CHECK(e2.evals_used == 6);
}

TEST_CASE("doubling delta leaves the linear-function estimate unchanged") {
  RngStream init(8);
  const Vec v = random_vec(6, init);
  const Objective f = linear_objective(v);
  const Vec x = random_vec(6, init);
  const GradientEstimate a = grad_est(f, x, 0.05, 3, RngStream(99));
  const GradientEstimate b = grad_est(f, x, 0.10, 3, RngStream(99));
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(a.g[i] == doctest::Approx(b.g[i]).epsilon(1e-9));
}

TEST_CASE("manifold estimator on an axis-aligned manifold matches the restriction") {
  // jacobian = first n rows of the identity; f depends on the first n coords.
  const int d = 9;
  const int n = 3;
  RngStream init(9);
  Vec v_low = random_vec(n, init);
  Vec v_full(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < n; ++i) v_full[static_cast<std::size_t>(i)] = v_low[static_cast<std::size_t>(i)];
  const Objective f_full = linear_objective(v_full);
  const Objective f_low = linear_objective(v_low);

  Mat jac(n, d);
  for (int i = 0; i < n; ++i) jac.at(i, i) = 1.0;

  const Vec x_full(static_cast<std::size_t>(d), 0.25);
  const Vec x_low(static_cast<std::size_t>(n), 0.25);
  const GradientEstimate em = manifold_grad_est(f_full, x_full, jac, 0.1, 2, RngStream(55));
  const GradientEstimate el = grad_est(f_low, x_low, 0.1, 2, RngStream(55));

  CHECK(em.dim_scale == n);
  for (int i = 0; i < n; ++i)
    CHECK(em.g[static_cast<std::size_t>(i)] == el.g[static_cast<std::size_t>(i)]);
  for (int i = n; i < d; ++i) CHECK(em.g[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("manifold estimator is unbiased for gradients in the tangent span") {
  const int d = 10;
  const int n = 3;
  RngStream init(10);
  // Random orthonormal basis; plant v inside the span.
  Mat raw(d, n);
  for (double& x : raw.data) x = init.next_gaussian();
  const GramSchmidtResult gs = gram_schmidt(raw);
  REQUIRE(gs.n_eff == n);
  Vec w = random_vec(n, init);
  const Vec v = matvec(gs.q, w);
  const Objective f = linear_objective(v);
  const Vec x = random_vec(d, init);
  const Mat jac = transpose(gs.q);  // n x d

  check_mean_recovers(f, x, v, 20000, 11, [&](RngStream rng) {
    return manifold_grad_est(f, x, jac, 0.1, 1, rng);
  });
}

TEST_CASE("manifold estimator sees nothing orthogonal to the span") {
  const int d = 10;
  const int n = 3;
  RngStream init(12);
  Mat raw(d, n);
  for (double& x : raw.data) x = init.next_gaussian();
  const GramSchmidtResult gs = gram_schmidt(raw);
  // v orthogonal to the span.
  Vec v = random_vec(d, init);
  const Vec proj = matvec(gs.q, mat_t_vec(gs.q, v));
  axpy(-1.0, proj, v);
  const Objective f = linear_objective(v);
  const Vec x = random_vec(d, init);
  const Mat jac = transpose(gs.q);

  check_mean_recovers(f, x, Vec(d, 0.0), 20000, 13, [&](RngStream rng) {
    return manifold_grad_est(f, x, jac, 0.1, 1, rng);
  });
}

TEST_CASE("zero jacobian falls back to the full space and flags it") {
  const Objective f = make_benchmark("sphere", 4);
  Mat jac(2, 4);  // all zeros
  const GradientEstimate est = manifold_grad_est(f, Vec(4, 1.0), jac, 0.1, 2, RngStream(14));
  CHECK(est.fallback_full_space);
  CHECK(est.dim_scale == 4);
  CHECK(est.evals_used == 4);
}

TEST_CASE("rank-deficient jacobian scales by the effective rank") {
  const Objective f = make_benchmark("sphere", 5);
  Mat jac(3, 5);
  jac.at(0, 0) = 1.0;
  jac.at(1, 0) = 1.0;  // duplicate row: rank 2
  jac.at(2, 1) = 1.0;
  const GradientEstimate est = manifold_grad_est(f, Vec(5, 0.5), jac, 0.1, 2, RngStream(15));
  CHECK(est.dim_scale == 2);
  CHECK(!est.fallback_full_space);
}

TEST_CASE("mix_gradients matches the mixing formula") {
  GradientEstimate e;
  GradientEstimate m;
  e.g = {2.0, 0.0};
  e.y_values = {1.0};
  m.g = {0.0, 4.0};
  m.y_values = {1.0};

  const Vec full_explore = mix_gradients(e, m, 1.0);
  CHECK(full_explore == Vec{1.0, 0.0});  // 0.5 * g_e
  const Vec full_manifold = mix_gradients(e, m, 0.0);
  CHECK(full_manifold == Vec{0.0, 2.0});  // 0.5 * g_m

  // beta = 1/d with d = 100, k_e = k_m = 1.
  const Vec mixed = mix_gradients(e, m, 0.01);
  CHECK(mixed[0] == doctest::Approx(0.005 * 2.0).epsilon(1e-15));
  CHECK(mixed[1] == doctest::Approx(0.495 * 4.0).epsilon(1e-15));

  CHECK_THROWS_AS((void)mix_gradients(e, m, 1.5), std::invalid_argument);
  CHECK_THROWS_AS((void)mix_gradients(e, m, -0.1), std::invalid_argument);
}

TEST_CASE("estimator argument validation") {
  const Objective f = make_benchmark("sphere", 3);
  RngStream rng(16);
  CHECK_THROWS_AS((void)grad_est(f, Vec(3, 0.0), 0.0, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)grad_est(f, Vec(3, 0.0), -1.0, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)grad_est(f, Vec(3, 0.0), 0.1, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)grad_est(f, Vec(2, 0.0), 0.1, 1, rng), std::invalid_argument);
}

TEST_CASE("non-finite objective raises an error carrying the point") {
  const Objective f(3, "bad", [](const Vec& x, std::uint64_t) {
    return x[0] > 0.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  });
  RngStream rng(17);
  try {
    (void)grad_est(f, Vec(3, 0.0), 0.5, 4, rng);
    FAIL("expected NonFiniteValueError");
  } catch (const NonFiniteValueError& e) {
    CHECK(e.point.size() == 3);
    CHECK(e.point[0] > 0.0);
  }
}

TEST_CASE("sum mode restores the unnormalized estimator") {
  RngStream init(18);
  const Vec v = random_vec(4, init);
  const Objective f = linear_objective(v);
  const Vec x = random_vec(4, init);
  EstimatorOptions mean_opt;
  EstimatorOptions sum_opt;
  sum_opt.sum_mode = true;
  const GradientEstimate a = grad_est(f, x, 0.1, 3, RngStream(19), mean_opt);
  const GradientEstimate b = grad_est(f, x, 0.1, 3, RngStream(19), sum_opt);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(b.g[i] == doctest::Approx(3.0 * a.g[i]).epsilon(1e-12));
}

TEST_CASE("top_b keeps the largest |y| pairs but reports all of them") {
  const Objective f = make_benchmark("cigar", 4);
  EstimatorOptions opt;
  opt.top_b = 2;
  const GradientEstimate est = grad_est(f, Vec(4, 0.7), 0.1, 5, RngStream(20), opt);
  CHECK(est.y_values.size() == 5);
  CHECK(est.lifted_directions.size() == 5);
  CHECK(est.kept_indices.size() == 2);
  CHECK(est.evals_used == 10);
  double min_kept = 1e300;
  for (int i : est.kept_indices)
    min_kept = std::min(min_kept, std::abs(est.y_values[static_cast<std::size_t>(i)]));
  for (std::size_t i = 0; i < est.y_values.size(); ++i) {
    const bool kept = std::find(est.kept_indices.begin(), est.kept_indices.end(),
                                static_cast<int>(i)) != est.kept_indices.end();
    if (!kept) CHECK(std::abs(est.y_values[i]) <= min_kept + 1e-15);
  }
}

TEST_CASE("records mirror the estimate contents") {
  const Objective f = make_benchmark("sphere", 4);
  const Vec x(4, 0.3);
  const GradientEstimate est = grad_est(f, x, 0.1, 3, RngStream(21));
  const std::vector<EvaluationRecord> recs = to_records(x, est, 12);
  REQUIRE(recs.size() == 3);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].x == x);
    CHECK(recs[i].u == est.lifted_directions[i]);
    CHECK(recs[i].y == est.y_values[i]);
    CHECK(recs[i].delta == 0.1);
    CHECK(recs[i].iteration == 12);
  }
}
