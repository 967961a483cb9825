#include "mdfo/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdfo/parallel.hpp"

namespace mdfo {

namespace {

thread_local DiffWork tl_work;

double record_loss(const ManifoldModel& model, const EvaluationRecord& rec, DiffWork& work) {
  const double slope = rec.y / (2.0 * rec.delta);
  const double d = directional_derivative(model, rec.x, rec.u, work);
  const double e = slope - d;
  return e * e;
}

struct BatchGradCtx {
  const ManifoldModel* model;
  const ReplayBuffer* buffer;
  const std::size_t* indices;
  std::size_t p_theta;
  std::size_t p_psi;
};

// Accumulates one record's loss gradient into slot: [d_theta | d_psi | loss].
void batch_grad_emit(void* ctx_ptr, std::size_t i, double* slot) {
  const BatchGradCtx& ctx = *static_cast<const BatchGradCtx*>(ctx_ptr);
  const EvaluationRecord& rec = (*ctx.buffer)[ctx.indices[i]];
  const double slope = rec.y / (2.0 * rec.delta);
  const double d = directional_derivative(*ctx.model, rec.x, rec.u, tl_work);
  const double e = slope - d;
  slot[ctx.p_theta + ctx.p_psi] += e * e;
  accumulate_param_grad_of_directional_derivative(*ctx.model, rec.x, rec.u, -2.0 * e,
                                                  tl_work, slot, slot + ctx.p_theta);
}

bool params_finite(const ManifoldModel& model) {
  return all_finite(model.encoder.params) && all_finite(model.head.params);
}

void zero_momentum(LearnerState& state) {
  state.momentum_theta.assign(state.model.encoder.params.size(), 0.0);
  state.momentum_psi.assign(state.model.head.params.size(), 0.0);
}

void reinit_model(LearnerState& state, RngStream& rng) {
  state.model = init_standard_normal(state.model.encoder.spec, state.model.head.spec, rng);
  state.snapshot = state.model;
  zero_momentum(state);
}

void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

// Runs one epoch of minibatch SGD with momentum. Gradient accumulation over
// a batch uses the fixed-order chunked reduction, so results do not depend
// on the thread count. Returns false when parameters go non-finite.
bool run_epoch(LearnerState& state, const ReplayBuffer& buffer,
               const std::vector<std::size_t>& order, const LearnerConfig& cfg,
               const Vec& current_x, const ManifoldModel& anchor, double lr) {
  const std::size_t n = buffer.size();
  const std::size_t p_theta = state.model.encoder.params.size();
  const std::size_t p_psi = state.model.head.params.size();
  const double data_coeff = cfg.raw_sum_mode ? static_cast<double>(n) : 1.0;
  const double reg_weight =
      cfg.raw_sum_mode ? cfg.lambda : cfg.lambda / static_cast<double>(n);

  std::vector<double> grad;
  std::vector<double> acc;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.minibatch)) {
    const std::size_t b = std::min(static_cast<std::size_t>(cfg.minibatch), n - start);
    BatchGradCtx ctx{&state.model, &buffer, order.data() + start, p_theta, p_psi};
    det_accumulate(b, p_theta + p_psi + 1, batch_grad_emit, &ctx, acc);
    grad.assign(p_theta + p_psi, 0.0);
    const double batch_scale = data_coeff / static_cast<double>(b);
    for (std::size_t j = 0; j < p_theta + p_psi; ++j) grad[j] = batch_scale * acc[j];

    if (cfg.lambda > 0.0) {
      Vec g_model = input_gradient(state.model, current_x, tl_work);
      const Vec g_anchor = input_gradient(anchor, current_x, tl_work);
      axpy(-1.0, g_anchor, g_model);
      const double r = norm2(g_model);
      if (r > 1e-12) {
        scale(g_model, 1.0 / r);
        accumulate_param_grad_of_directional_derivative(state.model, current_x, g_model,
                                                        reg_weight, tl_work, grad.data(),
                                                        grad.data() + p_theta);
      }
    }

    double* theta = state.model.encoder.params.data();
    double* psi = state.model.head.params.data();
    for (std::size_t j = 0; j < p_theta; ++j) {
      state.momentum_theta[j] = cfg.momentum * state.momentum_theta[j] + grad[j];
      theta[j] -= lr * state.momentum_theta[j];
    }
    for (std::size_t j = 0; j < p_psi; ++j) {
      state.momentum_psi[j] = cfg.momentum * state.momentum_psi[j] + grad[p_theta + j];
      psi[j] -= lr * state.momentum_psi[j];
    }
    if (!params_finite(state.model)) return false;
  }
  return true;
}

double total_objective(const ManifoldModel& model, const ReplayBuffer& buffer,
                       const LearnerConfig& cfg, const Vec& current_x,
                       const ManifoldModel& anchor, double* data_out) {
  const double data = mean_buffer_loss(model, buffer);
  if (data_out != nullptr) *data_out = data;
  const double n = static_cast<double>(buffer.size());
  const double reg_weight = cfg.raw_sum_mode ? cfg.lambda : cfg.lambda / n;
  const double reg = cfg.lambda > 0.0 ? regularizer(model, anchor, current_x) : 0.0;
  return (cfg.raw_sum_mode ? data * n : data) + reg_weight * reg;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::add(EvaluationRecord rec) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(rec));
}

void LearnerConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be >= 1");
  if (full_resolve_period < 1) throw std::invalid_argument("full_resolve_period must be >= 1");
  if (full_resolve_epochs < 1) throw std::invalid_argument("full_resolve_epochs must be >= 1");
  if (reinit_threshold < 0.0) throw std::invalid_argument("reinit_threshold must be >= 0");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be >= 1");
}

LearnerState make_learner_state(const MlpSpec& encoder_spec, const MlpSpec& head_spec,
                                RngStream& rng) {
  LearnerState state;
  state.model = init_standard_normal(encoder_spec, head_spec, rng);
  state.snapshot = state.model;
  zero_momentum(state);
  return state;
}

double one_step_loss(const ManifoldModel& model, const EvaluationRecord& rec) {
  if (!(rec.delta > 0.0)) throw std::invalid_argument("one_step_loss: delta must be > 0");
  DiffWork work;
  return record_loss(model, rec, work);
}

double regularizer(const ManifoldModel& model, const ManifoldModel& snapshot, const Vec& x) {
  DiffWork work;
  Vec g_model = input_gradient(model, x, work);
  const Vec g_snap = input_gradient(snapshot, x, work);
  axpy(-1.0, g_snap, g_model);
  return norm2(g_model);
}

double mean_buffer_loss(const ManifoldModel& model, const ReplayBuffer& buffer) {
  const std::size_t n = buffer.size();
  if (n == 0) return 0.0;
  std::vector<double> losses(n);
  parallel_for(static_cast<int>(n), [&](int i) {
    losses[static_cast<std::size_t>(i)] =
        record_loss(model, buffer[static_cast<std::size_t>(i)], tl_work);
  });
  return det_sum(losses) / static_cast<double>(n);
}

LearnerStepInfo ftrl_step(LearnerState& state, const ReplayBuffer& buffer,
                          const LearnerConfig& cfg, const Vec& current_x, RngStream& rng) {
  cfg.validate();
  if (buffer.size() == 0) throw std::invalid_argument("ftrl_step: buffer is empty");
  LearnerStepInfo info;
  info.buffer_size = buffer.size();

  const ManifoldModel pre_model = state.model;
  const std::vector<double> pre_mt = state.momentum_theta;
  const std::vector<double> pre_mp = state.momentum_psi;
  state.snapshot = pre_model;

  info.mean_loss_before = mean_buffer_loss(pre_model, buffer);
  const double n = static_cast<double>(buffer.size());
  const double total_before =
      cfg.raw_sum_mode ? info.mean_loss_before * n : info.mean_loss_before;

  std::vector<std::size_t> order(buffer.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const double lr = attempt == 0 ? cfg.learning_rate : cfg.learning_rate / 10.0;
    state.model = pre_model;
    state.momentum_theta = pre_mt;
    state.momentum_psi = pre_mp;

    bool diverged = false;
    bool nonfinite = false;
    double prev_total = total_before;
    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      shuffle_indices(order, rng);
      if (!run_epoch(state, buffer, order, cfg, current_x, state.snapshot, lr)) {
        nonfinite = true;
        break;
      }
      const double total =
          total_objective(state.model, buffer, cfg, current_x, state.snapshot, nullptr);
      if (!std::isfinite(total)) {
        nonfinite = true;
        break;
      }
      if (total > 10.0 * std::max(prev_total, 1e-300)) {
        diverged = true;
        break;
      }
      prev_total = total;
    }

    if (nonfinite) {
      reinit_model(state, rng);
      info.reinit = true;
      break;
    }
    if (!diverged) break;
    if (attempt == 0) {
      info.retried = true;
    }
  }

  info.mean_loss_after = mean_buffer_loss(state.model, buffer);
  state.iteration += 1;
  return info;
}

LearnerStepInfo full_resolve(LearnerState& state, const ReplayBuffer& buffer,
                             const LearnerConfig& cfg, const Vec& current_x,
                             RngStream& rng) {
  cfg.validate();
  LearnerStepInfo info;
  info.buffer_size = buffer.size();
  if (buffer.size() == 0) return info;
  info.resolved = true;

  const ManifoldModel incoming = state.model;
  const std::vector<double> incoming_mt = state.momentum_theta;
  const std::vector<double> incoming_mp = state.momentum_psi;
  const double incoming_loss = mean_buffer_loss(incoming, buffer);
  info.mean_loss_before = incoming_loss;

  state.model = init_standard_normal(incoming.encoder.spec, incoming.head.spec, rng);
  zero_momentum(state);

  std::vector<std::size_t> order(buffer.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  bool ok = true;
  for (int epoch = 0; epoch < cfg.full_resolve_epochs; ++epoch) {
    shuffle_indices(order, rng);
    if (!run_epoch(state, buffer, order, cfg, current_x, incoming, cfg.learning_rate)) {
      ok = false;
      break;
    }
  }

  double resolved_loss = ok ? mean_buffer_loss(state.model, buffer)
                            : std::numeric_limits<double>::infinity();
  if (!std::isfinite(resolved_loss) || resolved_loss >= incoming_loss) {
    state.model = incoming;
    state.momentum_theta = incoming_mt;
    state.momentum_psi = incoming_mp;
    info.mean_loss_after = incoming_loss;
  } else {
    info.mean_loss_after = resolved_loss;
  }
  state.snapshot = state.model;
  return info;
}

bool maybe_reinit(LearnerState& state, double grad_estimate_norm, const LearnerConfig& cfg,
                  RngStream& rng) {
  if (grad_estimate_norm < 0.0)
    throw std::invalid_argument("maybe_reinit: norm must be >= 0");
  if (grad_estimate_norm >= cfg.reinit_threshold) return false;
  reinit_model(state, rng);
  return true;
}

void reinit_learner(LearnerState& state, RngStream& rng) { reinit_model(state, rng); }

}  // namespace mdfo
