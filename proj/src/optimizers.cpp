#include "mdfo/optimizers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "mdfo/metrics.hpp"

namespace mdfo {

namespace {

// Child-stream ids; fixed so traces are reproducible across versions.
constexpr std::uint64_t kStreamInitF = 1;
constexpr std::uint64_t kStreamExplore = 2;
constexpr std::uint64_t kStreamManifold = 3;
constexpr std::uint64_t kStreamLearner = 4;
constexpr std::uint64_t kStreamModelInit = 5;
constexpr std::uint64_t kStreamMetrics = 6;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_common_config(const Objective& f, const Vec& x0, const OptimizerConfig& cfg) {
  if (!f.valid()) throw std::invalid_argument("optimizer: invalid objective");
  if (static_cast<int>(x0.size()) != f.dim())
    throw std::invalid_argument("optimizer: x0 dimension mismatch");
  if (!all_finite(x0)) throw std::invalid_argument("optimizer: x0 must be finite");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("optimizer: alpha must be > 0");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("optimizer: delta must be > 0");
  if (cfg.max_evals < 1) throw std::invalid_argument("optimizer: max_evals must be >= 1");
  if (cfg.stop_window < 0) throw std::invalid_argument("optimizer: stop_window must be >= 0");
  if (cfg.beta.has_value() && !(*cfg.beta >= 0.0 && *cfg.beta <= 1.0))
    throw std::invalid_argument("optimizer: beta must be in [0, 1]");
}

// Bookkeeping shared by the three loops: trace rows, stop rules, budget and
// metrics counters, and the exact-accounting check against the objective.
struct LoopDriver {
  const Objective& f;
  const OptimizerConfig& cfg;
  RngStream rng;
  RunResult res;
  Vec x;
  std::uint64_t count_at_start;
  std::deque<double> win_gn;
  std::deque<double> win_f;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  LoopDriver(const Objective& obj, const Vec& x0, const OptimizerConfig& config,
             RngStream stream)
      : f(obj), cfg(config), rng(stream), x(x0), count_at_start(obj.eval_count()) {}

  std::optional<double> wall_ms() {
    if (!cfg.record_wall_time) return std::nullopt;
    const auto dt = std::chrono::steady_clock::now() - t0;
    return std::chrono::duration<double, std::milli>(dt).count();
  }

  void record_start() {
    RngStream init = rng.derive(kStreamInitF);
    const double f0 = f.eval(x, init.next_u64());
    res.metrics_evals += 1;
    if (!std::isfinite(f0)) throw NonFiniteValueError("non-finite objective at x0", x);
    TraceRow row;
    row.iter = 0;
    row.evals = 0;
    row.f = f0;
    row.grad_norm = 0.0;
    row.wall_ms = wall_ms();
    res.trace.rows.push_back(row);
  }

  bool budget_allows(long evals_needed) const {
    return res.budget_evals + evals_needed <= cfg.max_evals;
  }

  // Returns true when the run should stop after this row.
  bool record_iteration(long t, double f_mean, double grad_norm,
                        std::optional<double> learner_loss,
                        std::optional<double> proj_residual) {
    TraceRow row;
    row.iter = t;
    row.evals = res.budget_evals;
    row.f = f_mean;
    row.grad_norm = grad_norm;
    row.learner_loss = learner_loss;
    row.proj_residual = proj_residual;
    row.wall_ms = wall_ms();
    res.trace.rows.push_back(row);
    res.iterations = t;

    if (cfg.stop_threshold.has_value() && f_mean <= *cfg.stop_threshold) {
      res.stop = StopReason::kThreshold;
      return true;
    }
    if (cfg.stop_window > 0) {
      win_gn.push_back(grad_norm);
      win_f.push_back(f_mean);
      if (static_cast<int>(win_gn.size()) > cfg.stop_window) {
        win_gn.pop_front();
        win_f.pop_front();
      }
      if (static_cast<int>(win_gn.size()) == cfg.stop_window) {
        const std::vector<double> gn(win_gn.begin(), win_gn.end());
        const std::vector<double> fv(win_f.begin(), win_f.end());
        if (stationarity_check(gn, fv, cfg.stop_grad_tol)) {
          res.stop = StopReason::kStationary;
          return true;
        }
      }
    }
    return false;
  }

  double effective_alpha(const std::vector<double>& kept_y) const {
    if (!cfg.step_std_scaling || kept_y.size() < 2) return cfg.alpha;
    double mean = 0.0;
    for (double y : kept_y) mean += y;
    mean /= static_cast<double>(kept_y.size());
    double var = 0.0;
    for (double y : kept_y) var += (y - mean) * (y - mean);
    const double sd = std::sqrt(var / static_cast<double>(kept_y.size()));
    return sd > 1e-12 ? cfg.alpha / sd : cfg.alpha;
  }

  void finish() {
    res.x_final = x;
    const auto used = static_cast<long>(f.eval_count() - count_at_start);
    if (used != res.budget_evals + res.metrics_evals && res.error.empty()) {
      res.error = "internal: evaluation accounting mismatch";
    }
  }
};

std::vector<double> kept_values(const GradientEstimate& est) {
  std::vector<double> out;
  out.reserve(est.kept_indices.size());
  for (int i : est.kept_indices) out.push_back(est.y_values[static_cast<std::size_t>(i)]);
  return out;
}

std::optional<double> probe_residual(LoopDriver& loop, long t, const Vec& at,
                                     const Mat& jacobian) {
  const GramSchmidtResult gs = gram_schmidt(transpose(jacobian));
  const double r = projection_residual(loop.f, at, gs.q, loop.cfg.metrics_probe_k,
                                       loop.cfg.delta,
                                       loop.rng.derive(kStreamMetrics).derive(
                                           static_cast<std::uint64_t>(t)));
  loop.res.metrics_evals += 2L * loop.cfg.metrics_probe_k;
  return r;
}

}  // namespace

bool stationarity_check(std::span<const double> grad_norms, std::span<const double> f_values,
                        double stop_grad_tol) {
  if (grad_norms.empty() || grad_norms.size() != f_values.size())
    throw std::invalid_argument("stationarity_check: bad window");
  const double med = median_of(std::vector<double>(grad_norms.begin(), grad_norms.end()));
  if (med < stop_grad_tol) return true;
  const double first = f_values.front();
  const double last = f_values.back();
  const double rel = (first - last) / std::max(std::abs(first), 1e-300);
  return rel < 1e-8;
}

RunResult random_search(const Objective& f, const Vec& x0, const OptimizerConfig& cfg,
                        RngStream rng) {
  check_common_config(f, x0, cfg);
  if (cfg.k_e < 1) throw std::invalid_argument("random_search: k_e must be >= 1");
  EstimatorOptions opt{cfg.estimator_sum_mode, cfg.top_b};
  LoopDriver loop(f, x0, cfg, rng);
  try {
    loop.record_start();
    const long per_iter = 2L * cfg.k_e;
    for (long t = 1; loop.budget_allows(per_iter); ++t) {
      const GradientEstimate est =
          grad_est(f, loop.x, cfg.delta, cfg.k_e, rng.derive(kStreamExplore).derive(
                                                      static_cast<std::uint64_t>(t)),
                   opt);
      loop.res.budget_evals += est.evals_used;
      axpy(-loop.effective_alpha(kept_values(est)), est.g, loop.x);
      if (loop.record_iteration(t, est.f_mean, norm2(est.g), std::nullopt, std::nullopt))
        break;
    }
  } catch (const NonFiniteValueError& err) {
    loop.res.stop = StopReason::kNonFinite;
    loop.res.error = err.what();
  }
  loop.finish();
  return loop.res;
}

RunResult manifold_random_search(const Objective& f, const Vec& x0,
                                 const JacobianFn& oracle_jacobian,
                                 const OptimizerConfig& cfg, RngStream rng) {
  check_common_config(f, x0, cfg);
  if (cfg.k_m < 1) throw std::invalid_argument("manifold_random_search: k_m must be >= 1");
  if (!oracle_jacobian) throw std::invalid_argument("manifold_random_search: no jacobian");
  EstimatorOptions opt{cfg.estimator_sum_mode, cfg.top_b};
  LoopDriver loop(f, x0, cfg, rng);
  try {
    loop.record_start();
    const long per_iter = 2L * cfg.k_m;
    for (long t = 1; loop.budget_allows(per_iter); ++t) {
      const Mat jac = oracle_jacobian(loop.x);
      const GradientEstimate est = manifold_grad_est(
          f, loop.x, jac, cfg.delta, cfg.k_m,
          rng.derive(kStreamManifold).derive(static_cast<std::uint64_t>(t)), opt);
      loop.res.budget_evals += est.evals_used;
      if (est.fallback_full_space) loop.res.fallback_count += 1;
      axpy(-loop.effective_alpha(kept_values(est)), est.g, loop.x);
      std::optional<double> residual;
      if (cfg.metrics_every > 0 && t % cfg.metrics_every == 0)
        residual = probe_residual(loop, t, loop.x, oracle_jacobian(loop.x));
      if (loop.record_iteration(t, est.f_mean, norm2(est.g), std::nullopt, residual)) break;
    }
  } catch (const NonFiniteValueError& err) {
    loop.res.stop = StopReason::kNonFinite;
    loop.res.error = err.what();
  }
  loop.finish();
  return loop.res;
}

LmrsResult lmrs(const Objective& f, const Vec& x0, const OptimizerConfig& cfg,
                const LearnerConfig& lcfg, RngStream rng) {
  check_common_config(f, x0, cfg);
  if (cfg.k_e < 1 || cfg.k_m < 1)
    throw std::invalid_argument("lmrs: k_e and k_m must both be >= 1");
  lcfg.validate();
  const int d = f.dim();
  const int n = cfg.manifold_dim > 0 ? cfg.manifold_dim : cfg.k_m;
  const double beta = cfg.beta.has_value() ? *cfg.beta : 1.0 / static_cast<double>(d);

  EstimatorOptions opt{cfg.estimator_sum_mode, cfg.top_b};
  RngStream model_rng = rng.derive(kStreamModelInit);
  RngStream learner_rng = rng.derive(kStreamLearner);
  LearnerState state =
      make_learner_state(standard_encoder_spec(d, n), standard_head_spec(n), model_rng);
  ReplayBuffer buffer(lcfg.buffer_capacity);

  LoopDriver loop(f, x0, cfg, rng);
  long last_probe_iter = 0;
  try {
    loop.record_start();
    const long per_iter = 2L * (cfg.k_e + cfg.k_m);
    for (long t = 1; loop.budget_allows(per_iter); ++t) {
      const Vec x_pre = loop.x;
      const GradientEstimate g_e =
          grad_est(f, x_pre, cfg.delta, cfg.k_e,
                   rng.derive(kStreamExplore).derive(static_cast<std::uint64_t>(t)), opt);
      loop.res.budget_evals += g_e.evals_used;

      // Model-side failures degrade this iteration to plain random search;
      // objective-side failures abort via NonFiniteValueError.
      bool learner_ok = true;
      GradientEstimate g_m;
      try {
        const Mat jac = input_jacobian(state.model, x_pre);
        g_m = manifold_grad_est(
            f, x_pre, jac, cfg.delta, cfg.k_m,
            rng.derive(kStreamManifold).derive(static_cast<std::uint64_t>(t)), opt);
      } catch (const NonFiniteValueError&) {
        throw;
      } catch (const std::exception&) {
        learner_ok = false;
      }

      Vec g;
      std::vector<double> kept = kept_values(g_e);
      double f_mean = g_e.f_mean;
      if (learner_ok) {
        loop.res.budget_evals += g_m.evals_used;
        if (g_m.fallback_full_space) loop.res.fallback_count += 1;
        g = mix_gradients(g_e, g_m, beta);
        const std::vector<double> kept_m = kept_values(g_m);
        kept.insert(kept.end(), kept_m.begin(), kept_m.end());
        f_mean = (g_e.f_mean * static_cast<double>(g_e.evals_used) +
                  g_m.f_mean * static_cast<double>(g_m.evals_used)) /
                 static_cast<double>(g_e.evals_used + g_m.evals_used);
      } else {
        g = g_e.g;
        loop.res.learner_degrade_count += 1;
      }

      axpy(-loop.effective_alpha(kept), g, loop.x);
      const double grad_norm = norm2(g);

      for (EvaluationRecord& rec : to_records(x_pre, g_e, t)) buffer.add(std::move(rec));
      if (learner_ok && !lcfg.exploration_records_only)
        for (EvaluationRecord& rec : to_records(x_pre, g_m, t)) buffer.add(std::move(rec));

      LearnerStepInfo linfo;
      bool resolved = false;
      if (learner_ok) {
        linfo = ftrl_step(state, buffer, lcfg, x_pre, learner_rng);
        if (t % lcfg.full_resolve_period == 0) {
          const LearnerStepInfo rinfo = full_resolve(state, buffer, lcfg, x_pre, learner_rng);
          linfo.mean_loss_after = rinfo.mean_loss_after;
          resolved = rinfo.resolved;
        }
      } else {
        reinit_learner(state, model_rng);
        linfo.buffer_size = buffer.size();
        linfo.reinit = true;
      }
      const bool reinit_now = maybe_reinit(state, grad_norm, lcfg, model_rng);
      if (reinit_now || linfo.reinit) loop.res.reinit_count += 1;

      LearnerTraceRow lrow;
      lrow.iteration = t;
      lrow.buffer_size = buffer.size();
      lrow.mean_loss_before = linfo.mean_loss_before;
      lrow.mean_loss_after = linfo.mean_loss_after;
      lrow.reinit_flag = reinit_now || linfo.reinit;
      lrow.resolve_flag = resolved;
      loop.res.trace.learner_rows.push_back(lrow);

      std::optional<double> residual;
      if (cfg.metrics_every > 0 && t % cfg.metrics_every == 0) {
        residual = probe_residual(loop, t, loop.x, input_jacobian(state.model, loop.x));
        last_probe_iter = t;
      }
      if (loop.record_iteration(t, f_mean, grad_norm, linfo.mean_loss_after, residual))
        break;
    }
    // Always measure at the final iterate when probing is on.
    if (cfg.metrics_every > 0 && loop.res.iterations > last_probe_iter) {
      loop.res.trace.rows.back().proj_residual = probe_residual(
          loop, loop.res.iterations, loop.x, input_jacobian(state.model, loop.x));
    }
  } catch (const NonFiniteValueError& err) {
    loop.res.stop = StopReason::kNonFinite;
    loop.res.error = err.what();
  }
  loop.finish();
  LmrsResult out;
  out.run = std::move(loop.res);
  out.model = std::move(state.model);
  out.learner_rng_state =
      RngState{learner_rng.master_seed(), learner_rng.stream_id(), learner_rng.counter()};
  return out;
}

}  // namespace mdfo
