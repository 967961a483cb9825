#ifndef MDFO_LEARNER_HPP
#define MDFO_LEARNER_HPP

#include <cstddef>
#include <deque>

#include "mdfo/estimators.hpp"
#include "mdfo/mlp.hpp"
#include "mdfo/rng.hpp"

namespace mdfo {

/// FIFO history of antithetic queries; capacity bounds memory and the cost
/// of one solver pass.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(EvaluationRecord rec);
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  const EvaluationRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  std::deque<EvaluationRecord> records_;
  std::size_t capacity_;
};

struct LearnerConfig {
  double lambda = 1e3;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int minibatch = 64;
  int inner_epochs = 1;
  int full_resolve_period = 100;
  int full_resolve_epochs = 200;
  double reinit_threshold = 1e-6;
  std::size_t buffer_capacity = 10000;
  /// Literal history objective (sum of losses + lambda R) instead of the
  /// length-normalized form (mean + lambda/N R). Same minimizers.
  bool raw_sum_mode = false;
  /// Feed only full-space exploration records to the solver.
  bool exploration_records_only = false;

  void validate() const;
};

struct LearnerState {
  ManifoldModel model;
  /// Model before the latest update; anchor of the temporal-smoothness term.
  ManifoldModel snapshot;
  std::vector<double> momentum_theta;
  std::vector<double> momentum_psi;
  long iteration = 0;
};

LearnerState make_learner_state(const MlpSpec& encoder_spec, const MlpSpec& head_spec,
                                RngStream& rng);

struct LearnerStepInfo {
  std::size_t buffer_size = 0;
  double mean_loss_before = 0.0;
  double mean_loss_after = 0.0;
  bool reinit = false;
  bool resolved = false;
  bool retried = false;
};

/// Squared mismatch between the observed slope y/(2 delta) and the model's
/// directional derivative along the queried direction.
double one_step_loss(const ManifoldModel& model, const EvaluationRecord& rec);

/// || grad_x of model at x - grad_x of snapshot at x ||_2. The snapshot side
/// is a constant; no gradient flows into it.
double regularizer(const ManifoldModel& model, const ManifoldModel& snapshot, const Vec& x);

/// Mean one-step loss over the buffer (the data term of the solver objective).
double mean_buffer_loss(const ManifoldModel& model, const ReplayBuffer& buffer);

/// One warm-started solver round: snapshots the incoming model, then runs
/// cfg.inner_epochs epochs of minibatch SGD with momentum on
///   mean loss + (lambda/N) * regularizer(model, snapshot, current_x).
/// A step that inflates the total by more than 10x is retried once at
/// learning_rate/10; a non-finite loss reinitializes the model.
LearnerStepInfo ftrl_step(LearnerState& state, const ReplayBuffer& buffer,
                          const LearnerConfig& cfg, const Vec& current_x, RngStream& rng);

/// From-scratch solve: reinitialize, zero momentum, run
/// cfg.full_resolve_epochs epochs, then keep whichever of the resolved and
/// incoming models fits the buffer better.
LearnerStepInfo full_resolve(LearnerState& state, const ReplayBuffer& buffer,
                             const LearnerConfig& cfg, const Vec& current_x,
                             RngStream& rng);

/// Reinitializes the model when the estimated gradient magnitude falls below
/// cfg.reinit_threshold. Returns true when a reinit happened.
bool maybe_reinit(LearnerState& state, double grad_estimate_norm, const LearnerConfig& cfg,
                  RngStream& rng);

/// Unconditional reinit: fresh standard-normal model, zeroed momentum.
void reinit_learner(LearnerState& state, RngStream& rng);

}  // namespace mdfo

#endif  // MDFO_LEARNER_HPP
