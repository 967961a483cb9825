#include "mdfo/problems.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mdfo {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_dim(int dim) {
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
}

double sphere(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double cigar(const Vec& x) {
  double s = x[0] * x[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += 1e6 * x[i] * x[i];
  return s;
}

double tablet(const Vec& x) {
  double s = 1e6 * x[0] * x[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * x[i];
  return s;
}

double elli(const Vec& x) {
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double e = d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
    s += std::pow(1e6, e) * x[i] * x[i];
  }
  return s;
}

double rosenbrock(const Vec& x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double diffpow(const Vec& x) {
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double e = d > 1 ? 2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(d - 1)
                           : 2.0;
    s += std::pow(std::abs(x[i]), e);
  }
  return s;
}

double rastrigin(const Vec& x) {
  double s = 10.0 * static_cast<double>(x.size());
  for (double v : x) s += v * v - 10.0 * std::cos(2.0 * kPi * v);
  return s;
}

double schwefel2_22(const Vec& x) {
  double sum = 0.0;
  double prod = 1.0;
  for (double v : x) {
    sum += std::abs(v);
    prod *= std::abs(v);
  }
  return sum + prod;
}

double styblinski_tang(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v * v * v - 16.0 * v * v + 5.0 * v;
  return 0.5 * s;
}

double happycat(const Vec& x) {
  const double d = static_cast<double>(x.size());
  double n2 = 0.0;
  double sum = 0.0;
  for (double v : x) {
    n2 += v * v;
    sum += v;
  }
  const double gap = n2 - d;
  return std::pow(gap * gap, 0.125) + (0.5 * n2 + sum) / d + 0.5;
}

// Per-coordinate minimizer of t^4 - 16 t^2 + 5 t, solved to machine precision.
double styblinski_root() {
  double t = -2.9;
  for (int it = 0; it < 64; ++it) {
    const double f = 4.0 * t * t * t - 32.0 * t + 5.0;
    const double df = 12.0 * t * t - 32.0;
    const double next = t - f / df;
    if (next == t) break;
    t = next;
  }
  return t;
}

struct BenchmarkDef {
  double (*fn)(const Vec&);
  int min_dim;
  // Fills the known global minimizer.
  void (*minimizer)(int dim, Vec& x);
};

void min_at_zero(int, Vec&) {}
void min_at_ones(int dim, Vec& x) { x.assign(static_cast<std::size_t>(dim), 1.0); }
void min_at_neg_ones(int dim, Vec& x) { x.assign(static_cast<std::size_t>(dim), -1.0); }
void min_styblinski(int dim, Vec& x) {
  x.assign(static_cast<std::size_t>(dim), styblinski_root());
}

const std::vector<std::pair<std::string, BenchmarkDef>>& benchmark_table() {
  static const std::vector<std::pair<std::string, BenchmarkDef>> table = {
      {"sphere", {sphere, 1, min_at_zero}},
      {"cigar", {cigar, 1, min_at_zero}},
      {"tablet", {tablet, 1, min_at_zero}},
      {"elli", {elli, 1, min_at_zero}},
      {"rosenbrock", {rosenbrock, 2, min_at_ones}},
      {"diffpow", {diffpow, 1, min_at_zero}},
      {"rastrigin", {rastrigin, 1, min_at_zero}},
      {"schwefel2_22", {schwefel2_22, 1, min_at_zero}},
      {"styblinski_tang", {styblinski_tang, 1, min_styblinski}},
      {"happycat", {happycat, 1, min_at_neg_ones}},
  };
  return table;
}

const BenchmarkDef& find_benchmark(const std::string& name) {
  for (const auto& [n, def] : benchmark_table())
    if (n == name) return def;
  std::ostringstream msg;
  msg << "unknown benchmark '" << name << "'; supported:";
  for (const auto& [n, def] : benchmark_table()) msg << ' ' << n;
  throw std::invalid_argument(msg.str());
}

}  // namespace

Objective::Objective(int dim, std::string descriptor, EvalFn fn)
    : state_(std::make_shared<State>()) {
  check_dim(dim);
  state_->dim = dim;
  state_->descriptor = std::move(descriptor);
  state_->fn = std::move(fn);
}

double Objective::eval(const Vec& x, std::uint64_t noise_seed) const {
  if (static_cast<int>(x.size()) != state_->dim)
    throw std::invalid_argument("objective: dimension mismatch");
  state_->count.fetch_add(1, std::memory_order_relaxed);
  return state_->fn(x, noise_seed);
}

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [n, def] : benchmark_table()) out.push_back(n);
    return out;
  }();
  return names;
}

Objective make_benchmark(const std::string& name, int dim) {
  check_dim(dim);
  const BenchmarkDef& def = find_benchmark(name);
  if (dim < def.min_dim)
    throw std::invalid_argument(name + ": dim too small");
  std::ostringstream desc;
  desc << name << "(d=" << dim << ")";
  auto fn = def.fn;
  return Objective(dim, desc.str(),
                   [fn](const Vec& x, std::uint64_t) { return fn(x); });
}

BenchmarkMinimum benchmark_minimum(const std::string& name, int dim) {
  check_dim(dim);
  const BenchmarkDef& def = find_benchmark(name);
  BenchmarkMinimum out;
  out.x_min.assign(static_cast<std::size_t>(dim), 0.0);
  def.minimizer(dim, out.x_min);
  out.f_min = def.fn(out.x_min);
  return out;
}

SyntheticResult make_synthetic(int d, int n, RngStream& rng, bool raw_init) {
  if (n < 1 || n > d) throw std::invalid_argument("make_synthetic: need 1 <= n <= d");
  auto problem = std::make_shared<SyntheticManifoldProblem>();
  problem->d = d;
  problem->n = n;

  const MlpSpec enc_spec = planted_encoder_spec(d, n);
  problem->planted_encoder = init_mlp_standard_normal(enc_spec, rng);
  if (!raw_init) {
    for (int l = 0; l < enc_spec.num_layers(); ++l) {
      const std::size_t in = static_cast<std::size_t>(enc_spec.layer_dims[static_cast<std::size_t>(l)]);
      const std::size_t out = static_cast<std::size_t>(enc_spec.layer_dims[static_cast<std::size_t>(l) + 1]);
      const double s = 1.0 / std::sqrt(static_cast<double>(in));
      double* p = problem->planted_encoder.params.data() + enc_spec.layer_offset(l);
      for (std::size_t i = 0; i < in * out + out; ++i) p[i] *= s;
    }
  }

  // Symmetrized gaussian matrix, eigenvalues clipped below to stay strictly
  // convex in the latent variable.
  Mat a(n, n);
  for (double& v : a.data) v = rng.next_gaussian();
  Mat sym(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sym.at(i, j) = 0.5 * (a.at(i, j) + a.at(j, i));
  const SymmetricEigen eig = symmetric_eigen(sym);
  constexpr double kMinEigenvalue = 1e-3;
  Mat q(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        const double lam = std::max(eig.eigenvalues[static_cast<std::size_t>(k)], kMinEigenvalue);
        acc += eig.eigenvectors.at(i, k) * lam * eig.eigenvectors.at(j, k);
      }
      q.at(i, j) = acc;
    }
  }
  // Re-symmetrize to remove rounding skew from the reconstruction.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (q.at(i, j) + q.at(j, i));
      q.at(i, j) = m;
      q.at(j, i) = m;
    }
  problem->quad_matrix = std::move(q);

  problem->quad_vector.resize(static_cast<std::size_t>(n));
  for (double& v : problem->quad_vector) v = rng.next_gaussian();
  problem->quad_offset = rng.next_gaussian();

  std::ostringstream desc;
  desc << "synthetic(d=" << d << ",n=" << n << ")";
  std::shared_ptr<const SyntheticManifoldProblem> view = problem;
  Objective obj(d, desc.str(), [view](const Vec& x, std::uint64_t) {
    const Vec z = mlp_forward(view->planted_encoder, x);
    const Vec qz = matvec(view->quad_matrix, z);
    return dot(z, qz) + dot(view->quad_vector, z) + view->quad_offset;
  });

  return SyntheticResult{std::move(obj), view};
}

Mat oracle_jacobian(const SyntheticManifoldProblem& problem, const Vec& x) {
  return mlp_input_jacobian(problem.planted_encoder, x);
}

Objective with_noise(const Objective& base, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("with_noise: sigma must be >= 0");
  if (sigma == 0.0) return base;
  std::ostringstream desc;
  desc << base.descriptor() << "+noise(sigma=" << sigma << ")";
  Objective inner = base;
  return Objective(base.dim(), desc.str(),
                   [inner, sigma](const Vec& x, std::uint64_t seed) {
                     RngStream noise(seed, 0x6e6f697365ULL);  // "noise"
                     return inner.eval(x, seed) + sigma * noise.next_gaussian();
                   });
}

}  // namespace mdfo
