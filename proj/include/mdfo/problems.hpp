#ifndef MDFO_PROBLEMS_HPP
#define MDFO_PROBLEMS_HPP

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mdfo/linalg.hpp"
#include "mdfo/mlp.hpp"
#include "mdfo/rng.hpp"

namespace mdfo {

/// Black-box stochastic objective F(x, xi), addressed by (point, noise seed).
/// Copies share the evaluation counter; eval is safe to call concurrently.
class Objective {
 public:
  using EvalFn = std::function<double(const Vec&, std::uint64_t)>;

  Objective() = default;
  Objective(int dim, std::string descriptor, EvalFn fn);

  double eval(const Vec& x, std::uint64_t noise_seed) const;
  int dim() const { return state_->dim; }
  std::uint64_t eval_count() const { return state_->count.load(); }
  const std::string& descriptor() const { return state_->descriptor; }
  bool valid() const { return state_ != nullptr; }

 private:
  struct State {
    int dim;
    std::string descriptor;
    EvalFn fn;
    mutable std::atomic<std::uint64_t> count{0};
  };
  std::shared_ptr<State> state_;
};

/// Names accepted by make_benchmark.
const std::vector<std::string>& benchmark_names();

/// Deterministic noiseless benchmark. Throws std::invalid_argument for an
/// unknown name (the message lists the supported set).
Objective make_benchmark(const std::string& name, int dim);

struct BenchmarkMinimum {
  Vec x_min;
  double f_min;
};

/// Known global minimum of a benchmark (location computed to machine
/// precision where the textbook form needs a root solve).
BenchmarkMinimum benchmark_minimum(const std::string& name, int dim);

/// Target function with planted low-dimensional structure:
/// f(x) = z^T Q z + b^T z + c with z the output of a fixed random encoder.
struct SyntheticManifoldProblem {
  int d = 0;
  int n = 0;
  Mlp planted_encoder;  // Linear(d,2n) -> ReLU -> Linear(2n,n)
  Mat quad_matrix;      // symmetric, eigenvalues >= 1e-3
  Vec quad_vector;
  double quad_offset = 0.0;
};

struct SyntheticResult {
  Objective objective;
  std::shared_ptr<const SyntheticManifoldProblem> problem;
};

/// Encoder weights are gaussian scaled by 1/sqrt(fan_in); raw_init restores
/// unscaled standard normals (magnitudes grow like d^2 in the quadratic,
/// which overflows at large d). The quadratic is a symmetrized gaussian
/// matrix with eigenvalues clipped below at 1e-3.
SyntheticResult make_synthetic(int d, int n, RngStream& rng, bool raw_init = false);

/// Jacobian of the planted encoder at x (n x d); the oracle tangent basis.
Mat oracle_jacobian(const SyntheticManifoldProblem& problem, const Vec& x);

/// Adds seed-derived gaussian noise of standard deviation sigma.
Objective with_noise(const Objective& base, double sigma);

}  // namespace mdfo

#endif  // MDFO_PROBLEMS_HPP
