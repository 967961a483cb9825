// Timing comparison between the serial reference kernels and the OpenMP
// paths used in production: objective evaluation batches, buffer-loss
// passes, and batch gradient accumulation. Thread count follows
// MANIFOLD_DFO_THREADS (or the OpenMP default).

#include <chrono>
#include <cstdio>
#include <vector>

#include "mdfo/estimators.hpp"
#include "mdfo/learner.hpp"
#include "mdfo/parallel.hpp"
#include "mdfo/problems.hpp"

using namespace mdfo;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename Fn>
double time_ms(int reps, Fn&& fn) {
  fn();  // warm-up
  const double t0 = now_ms();
  for (int r = 0; r < reps; ++r) fn();
  return (now_ms() - t0) / reps;
}

struct BatchCtx {
  const Objective* f;
  const std::vector<Vec>* points;
  std::vector<double>* out;
};

void bench_eval_batch(const Objective& f, int batch, int reps) {
  RngStream rng(17);
  std::vector<Vec> points;
  for (int i = 0; i < batch; ++i) {
    Vec x(static_cast<std::size_t>(f.dim()));
    for (double& v : x) v = rng.next_gaussian();
    points.push_back(std::move(x));
  }
  std::vector<double> out(static_cast<std::size_t>(batch));

  const double serial = time_ms(reps, [&] {
    for (int i = 0; i < batch; ++i)
      out[static_cast<std::size_t>(i)] = f.eval(points[static_cast<std::size_t>(i)], 0);
  });
  const double parallel = time_ms(reps, [&] {
    parallel_for(batch, [&](int i) {
      out[static_cast<std::size_t>(i)] = f.eval(points[static_cast<std::size_t>(i)], 0);
    });
  });
  std::printf("eval_batch[%d x %s]   serial %8.3f ms   openmp %8.3f ms   speedup %.2fx\n",
              batch, f.descriptor().c_str(), serial, parallel, serial / parallel);
}

void bench_buffer_loss(int d, int n, int records, int reps) {
  RngStream rng(23);
  LearnerState state =
      make_learner_state(standard_encoder_spec(d, n), standard_head_spec(n), rng);
  ReplayBuffer buffer(static_cast<std::size_t>(records));
  for (int i = 0; i < records; ++i) {
    EvaluationRecord rec;
    rec.x.resize(static_cast<std::size_t>(d));
    for (double& v : rec.x) v = rng.next_gaussian();
    rec.u = sample_unit_sphere(d, rng);
    rec.y = rng.next_gaussian();
    rec.delta = 0.01;
    rec.iteration = i;
    buffer.add(std::move(rec));
  }

  const double serial = time_ms(reps, [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < buffer.size(); ++i)
      acc += one_step_loss(state.model, buffer[i]);
    volatile double sink = acc;
    (void)sink;
  });
  const double parallel = time_ms(reps, [&] {
    volatile double sink = mean_buffer_loss(state.model, buffer);
    (void)sink;
  });
  std::printf("buffer_loss[%d recs d=%d n=%d]   serial %8.3f ms   openmp %8.3f ms   speedup %.2fx\n",
              records, d, n, serial, parallel, serial / parallel);
}

void bench_ftrl_epoch(int d, int n, int records, int reps) {
  RngStream rng(29);
  LearnerState state =
      make_learner_state(standard_encoder_spec(d, n), standard_head_spec(n), rng);
  ReplayBuffer buffer(static_cast<std::size_t>(records));
  for (int i = 0; i < records; ++i) {
    EvaluationRecord rec;
    rec.x.resize(static_cast<std::size_t>(d));
    for (double& v : rec.x) v = rng.next_gaussian();
    rec.u = sample_unit_sphere(d, rng);
    rec.y = rng.next_gaussian();
    rec.delta = 0.01;
    rec.iteration = i;
    buffer.add(std::move(rec));
  }
  LearnerConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.minibatch = 256;  // wide batches give the chunked reduction room to fan out
  Vec x(static_cast<std::size_t>(d), 0.1);

  const double step = time_ms(reps, [&] {
    RngStream step_rng(31);
    ftrl_step(state, buffer, cfg, x, step_rng);
  });
  std::printf("ftrl_step[%d recs d=%d n=%d batch=%d]   %8.3f ms (threads=%d)\n", records, d,
              n, cfg.minibatch, step, thread_cap());
}

}  // namespace

int main() {
  std::printf("thread cap: %d (MANIFOLD_DFO_THREADS to change)\n\n", thread_cap());

  RngStream rng(11);
  SyntheticResult synth = make_synthetic(200, 4, rng);
  bench_eval_batch(synth.objective, 512, 20);
  bench_eval_batch(make_benchmark("rastrigin", 200), 512, 20);
  bench_buffer_loss(100, 2, 4000, 10);
  bench_buffer_loss(100, 5, 4000, 10);
  bench_ftrl_epoch(100, 2, 4000, 5);
  return 0;
}
