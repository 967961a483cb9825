#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fd_oracle.hpp"
#include "mdfo/learner.hpp"
#include "test_helpers.hpp"

using namespace mdfo;
using namespace mdfo::testing;

namespace {

EvaluationRecord make_record(const Vec& x, const Vec& u, double y, double delta, long iter) {
  return EvaluationRecord{x, u, y, delta, iter};
}

// Noise-free records labeled by a planted model: y = 2 delta * D(planted).
ReplayBuffer realizable_buffer(const ManifoldModel& planted, int count, double delta,
                               RngStream& rng, std::size_t capacity) {
  const int d = planted.encoder.spec.input_dim();
  ReplayBuffer buffer(capacity);
  for (int i = 0; i < count; ++i) {
    const Vec x = random_vec(d, rng);
    const Vec u = sample_unit_sphere(d, rng);
    const double y = 2.0 * delta * directional_derivative(planted, x, u);
    buffer.add(make_record(x, u, y, delta, i));
  }
  return buffer;
}

}  // namespace

TEST_CASE("replay buffer evicts FIFO and preserves order") {
  ReplayBuffer buffer(5);
  for (int i = 0; i < 8; ++i)
    buffer.add(make_record(Vec{static_cast<double>(i)}, Vec{1.0}, 0.0, 0.1, i));
  CHECK(buffer.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(buffer[i].iteration == static_cast<long>(i) + 3);  // oldest 3 evicted
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("one_step_loss: perfect fit, unit residual, linear replica") {
  RngStream rng(1);
  const ManifoldModel m = random_model(5, 2, rng);
  const Vec x = random_vec(5, rng);
  const Vec u = sample_unit_sphere(5, rng);
  const double delta = 0.05;

  // y chosen so the observed slope equals the model's directional derivative.
  const double d = directional_derivative(m, x, u);
  CHECK(one_step_loss(m, make_record(x, u, 2.0 * delta * d, delta, 0)) ==
        doctest::Approx(0.0).epsilon(1e-18));

  // Zero-head model: directional derivative 0, slope 1 -> loss 1.
  ManifoldModel zero;
  zero.encoder = init_mlp_standard_normal(standard_encoder_spec(5, 2), rng);
  zero.head = make_mlp(standard_head_spec(2));
  CHECK(one_step_loss(zero, make_record(x, u, 2.0 * delta, delta, 0)) == 1.0);

  // Exact linear replica of a linear objective: zero loss to round-off.
  const Vec v = random_vec(5, rng);
  const ManifoldModel lin = linear_model(v);
  const double y = 2.0 * delta * dot(v, u);  // what an antithetic query returns
  CHECK(one_step_loss(lin, make_record(x, u, y, delta, 0)) < 1e-20);

  CHECK_THROWS_AS((void)one_step_loss(m, make_record(x, u, 0.0, 0.0, 0)),
                  std::invalid_argument);
}

TEST_CASE("regularizer: zero at identity, norm of a linear model, bias invariance") {
  RngStream rng(2);
  const ManifoldModel m = random_model(6, 2, rng);
  const Vec x = random_vec(6, rng);
  CHECK(regularizer(m, m, x) == 0.0);

  ManifoldModel zero_head;
  zero_head.encoder = init_mlp_standard_normal(standard_encoder_spec(4, 2), rng);
  zero_head.head = make_mlp(standard_head_spec(2));
  const Vec w = random_vec(4, rng);
  const ManifoldModel lin = linear_model(w);
  // Different architectures share only the input dimension; the regularizer
  // compares input gradients, so that is all it needs.
  const Vec x4 = random_vec(4, rng);
  CHECK(regularizer(lin, zero_head, x4) == doctest::Approx(norm2(w)).epsilon(1e-12));

  ManifoldModel shifted = m;
  shifted.head.params.back() += 10.0;  // final head bias
  CHECK(regularizer(shifted, m, x) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gradient of loss + regularizer matches finite differences") {
  RngStream rng(3);
  int checked = 0;
  double max_err = 0.0;
  while (checked < 50) {
    const ManifoldModel model = random_model(4, 2, rng);
    const ManifoldModel snapshot = random_model(4, 2, rng);
    const Vec x = random_vec(4, rng);
    const Vec u = sample_unit_sphere(4, rng);
    if (min_abs_preactivation(model, x) < 1e-3) continue;
    ++checked;
    const double delta = 0.1;
    const double y = rng.next_gaussian();
    const EvaluationRecord rec = make_record(x, u, y, delta, 0);
    const double lambda = 2.5;

    // Analytic gradient assembled the way the solver assembles it.
    const std::size_t pt = model.encoder.params.size();
    const std::size_t pp = model.head.params.size();
    std::vector<double> grad(pt + pp, 0.0);
    DiffWork work;
    const double e = y / (2.0 * delta) - directional_derivative(model, x, u);
    accumulate_param_grad_of_directional_derivative(model, x, u, -2.0 * e, work,
                                                    grad.data(), grad.data() + pt);
    Vec diff = input_gradient(model, x);
    axpy(-1.0, input_gradient(snapshot, x), diff);
    const double r = norm2(diff);
    if (r > 1e-12) {
      scale(diff, 1.0 / r);
      accumulate_param_grad_of_directional_derivative(model, x, diff, lambda, work,
                                                      grad.data(), grad.data() + pt);
    }

    // Central differences of the scalar objective.
    ManifoldModel probe = model;
    auto objective = [&](const ManifoldModel& mm) {
      return one_step_loss(mm, rec) + lambda * regularizer(mm, snapshot, x);
    };
    const double h = 1e-5;
    for (std::size_t i = 0; i < pt + pp; ++i) {
      double* p = i < pt ? &probe.encoder.params[i] : &probe.head.params[i - pt];
      const double saved = *p;
      *p = saved + h;
      const double fp = objective(probe);
      *p = saved - h;
      const double fm = objective(probe);
      *p = saved;
      max_err = std::max(max_err, rel_err(grad[i], (fp - fm) / (2.0 * h)));
    }
  }
  CHECK(max_err < 1e-5);
}

TEST_CASE("ftrl_step is an exact no-op at a global minimum of the objective") {
  RngStream rng(4);
  const ManifoldModel planted = random_model(6, 2, rng);
  ReplayBuffer buffer = realizable_buffer(planted, 40, 0.1, rng, 100);

  LearnerState state;
  state.model = planted;
  state.snapshot = planted;
  state.momentum_theta.assign(planted.encoder.params.size(), 0.0);
  state.momentum_psi.assign(planted.head.params.size(), 0.0);

  LearnerConfig cfg;
  cfg.learning_rate = 1e-2;
  RngStream step_rng(5);
  const LearnerStepInfo info = ftrl_step(state, buffer, cfg, random_vec(6, rng), step_rng);
  CHECK(info.mean_loss_before < 1e-20);
  CHECK(state.model.encoder.params == planted.encoder.params);
  CHECK(state.model.head.params == planted.head.params);
}

TEST_CASE("ftrl_step fits a single record") {
  RngStream rng(6);
  ReplayBuffer buffer(10);
  const Vec x = random_vec(5, rng);
  const Vec u = sample_unit_sphere(5, rng);
  buffer.add(make_record(x, u, 2.0 * 0.1 * 0.7, 0.1, 0));  // slope target 0.7

  LearnerConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.lambda = 0.0;
  LearnerState state = make_learner_state(standard_encoder_spec(5, 2), standard_head_spec(2),
                                          rng);
  RngStream step_rng(7);
  for (int i = 0; i < 500; ++i) ftrl_step(state, buffer, cfg, x, step_rng);
  CHECK(mean_buffer_loss(state.model, buffer) < 1e-6);
}

TEST_CASE("temporal smoothing shrinks gradient drift (median over 20 seeds)") {
  int wins = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    RngStream rng(100 + static_cast<std::uint64_t>(trial));
    const ManifoldModel target = random_model(5, 2, rng);
    ReplayBuffer buffer = realizable_buffer(target, 60, 0.1, rng, 100);
    const Vec x_cur = random_vec(5, rng);

    double drift[2];
    for (int which = 0; which < 2; ++which) {
      RngStream model_rng(200 + static_cast<std::uint64_t>(trial));
      LearnerState state = make_learner_state(standard_encoder_spec(5, 2),
                                              standard_head_spec(2), model_rng);
      const ManifoldModel before = state.model;
      LearnerConfig cfg;
      cfg.learning_rate = 1e-2;
      cfg.lambda = which == 0 ? 0.0 : 1e3;
      RngStream step_rng(300 + static_cast<std::uint64_t>(trial));
      ftrl_step(state, buffer, cfg, x_cur, step_rng);
      drift[which] = regularizer(state.model, before, x_cur);
    }
    if (drift[1] < drift[0]) ++wins;
  }
  CHECK(wins > trials / 2);
}

TEST_CASE("divergence guard retries or reinitializes on an exploding step") {
  RngStream rng(8);
  const ManifoldModel target = random_model(5, 2, rng);
  ReplayBuffer buffer = realizable_buffer(target, 50, 0.1, rng, 100);
  LearnerConfig cfg;
  cfg.learning_rate = 50.0;  // far beyond stable
  cfg.lambda = 0.0;
  LearnerState state = make_learner_state(standard_encoder_spec(5, 2), standard_head_spec(2),
                                          rng);
  RngStream step_rng(9);
  const LearnerStepInfo info = ftrl_step(state, buffer, cfg, random_vec(5, rng), step_rng);
  CHECK((info.retried || info.reinit));
  CHECK(std::isfinite(info.mean_loss_after));
  CHECK(all_finite(state.model.encoder.params));
}

TEST_CASE("full_resolve: empty buffer is a no-op") {
  RngStream rng(10);
  LearnerState state = make_learner_state(standard_encoder_spec(5, 2), standard_head_spec(2),
                                          rng);
  const ManifoldModel before = state.model;
  ReplayBuffer buffer(10);
  LearnerConfig cfg;
  RngStream step_rng(11);
  const LearnerStepInfo info = full_resolve(state, buffer, cfg, Vec(5, 0.0), step_rng);
  CHECK(!info.resolved);
  CHECK(state.model.encoder.params == before.encoder.params);
}

TEST_CASE("full_resolve fits a realizable buffer (d=20, n=2, 500 records)") {
  RngStream rng(12);
  const ManifoldModel planted = random_model(20, 2, rng);
  ReplayBuffer buffer = realizable_buffer(planted, 500, 0.1, rng, 1000);

  LearnerConfig cfg;
  cfg.lambda = 0.0;
  cfg.learning_rate = 1e-2;
  cfg.full_resolve_epochs = 200;
  LearnerState state = make_learner_state(standard_encoder_spec(20, 2),
                                          standard_head_spec(2), rng);
  RngStream step_rng(13);
  const LearnerStepInfo info = full_resolve(state, buffer, cfg, Vec(20, 0.0), step_rng);
  CHECK(info.resolved);
  CHECK(info.mean_loss_after < 1e-4);
  CHECK(mean_buffer_loss(state.model, buffer) < 1e-4);
}

TEST_CASE("full_resolve keeps the incoming model when the re-solve is worse") {
  RngStream rng(14);
  const ManifoldModel planted = random_model(8, 2, rng);
  ReplayBuffer buffer = realizable_buffer(planted, 60, 0.1, rng, 100);

  LearnerState state;
  state.model = planted;  // already perfect: loss 0
  state.snapshot = planted;
  state.momentum_theta.assign(planted.encoder.params.size(), 0.0);
  state.momentum_psi.assign(planted.head.params.size(), 0.0);

  LearnerConfig cfg;
  cfg.full_resolve_epochs = 1;
  cfg.learning_rate = 1e-4;  // one timid epoch cannot reach zero loss
  RngStream step_rng(15);
  const LearnerStepInfo info = full_resolve(state, buffer, cfg, Vec(8, 0.0), step_rng);
  CHECK(info.resolved);
  CHECK(state.model.encoder.params == planted.encoder.params);
  CHECK(info.mean_loss_after == info.mean_loss_before);
}

TEST_CASE("maybe_reinit threshold behavior") {
  RngStream rng(16);
  LearnerConfig cfg;  // reinit_threshold = 1e-6
  LearnerState state = make_learner_state(standard_encoder_spec(5, 2), standard_head_spec(2),
                                          rng);
  const ManifoldModel before = state.model;
  RngStream reinit_rng(17);

  CHECK(!maybe_reinit(state, 1.0, cfg, reinit_rng));
  CHECK(state.model.encoder.params == before.encoder.params);

  CHECK(maybe_reinit(state, 0.0, cfg, reinit_rng));
  CHECK(state.model.encoder.params != before.encoder.params);

  const ManifoldModel mid = state.model;
  CHECK(maybe_reinit(state, 1e-7, cfg, reinit_rng));
  CHECK(state.model.encoder.params != mid.encoder.params);

  CHECK_THROWS_AS((void)maybe_reinit(state, -1.0, cfg, reinit_rng), std::invalid_argument);
}

TEST_CASE("ftrl_step on an empty buffer is rejected") {
  RngStream rng(18);
  LearnerState state = make_learner_state(standard_encoder_spec(4, 2), standard_head_spec(2),
                                          rng);
  ReplayBuffer buffer(10);
  LearnerConfig cfg;
  RngStream step_rng(19);
  CHECK_THROWS_AS((void)ftrl_step(state, buffer, cfg, Vec(4, 0.0), step_rng),
                  std::invalid_argument);
}
