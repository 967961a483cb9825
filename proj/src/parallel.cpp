#include "mdfo/parallel.hpp"

#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mdfo {

int thread_cap() {
  const char* env = std::getenv("MANIFOLD_DFO_THREADS");
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) {
      return static_cast<int>(v);
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

bool parallel_enabled() {
#ifdef _OPENMP
  return thread_cap() > 1;
#else
  return false;
#endif
}

namespace detail {

void parallel_for_impl(int n, void (*trampoline)(void*, int), void* ctx) {
  if (n <= 0) return;
#ifdef _OPENMP
  const int threads = thread_cap();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) trampoline(ctx, i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) trampoline(ctx, i);
}

}  // namespace detail

double serial_sum(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc;
}

double det_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n <= kReduceChunk) return serial_sum(xs);
  const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(nchunks, 0.0);
  struct Ctx {
    std::span<const double> xs;
    std::vector<double>* partial;
  } c{xs, &partial};
  parallel_for(static_cast<int>(nchunks), [&c](int ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kReduceChunk;
    const std::size_t end = std::min(begin + kReduceChunk, c.xs.size());
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += c.xs[i];
    (*c.partial)[static_cast<std::size_t>(ci)] = acc;
  });
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

void serial_accumulate(std::size_t n, std::size_t width,
                       void (*emit)(void*, std::size_t, double*), void* ctx,
                       std::vector<double>& out) {
  out.assign(width, 0.0);
  for (std::size_t i = 0; i < n; ++i) emit(ctx, i, out.data());
}

void det_accumulate(std::size_t n, std::size_t width,
                    void (*emit)(void*, std::size_t, double*), void* ctx,
                    std::vector<double>& out) {
  // Reduction structure depends only on n, never on the thread count.
  if (n <= kReduceChunk) {
    serial_accumulate(n, width, emit, ctx, out);
    return;
  }
  const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(nchunks * width, 0.0);
  struct Ctx {
    std::size_t n, width;
    void (*emit)(void*, std::size_t, double*);
    void* inner;
    double* partial;
  } c{n, width, emit, ctx, partial.data()};
  parallel_for(static_cast<int>(nchunks), [&c](int ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kReduceChunk;
    const std::size_t end = std::min(begin + kReduceChunk, c.n);
    double* slot = c.partial + static_cast<std::size_t>(ci) * c.width;
    for (std::size_t i = begin; i < end; ++i) c.emit(c.inner, i, slot);
  });
  out.assign(width, 0.0);
  for (std::size_t ci = 0; ci < nchunks; ++ci) {
    const double* slot = partial.data() + ci * width;
    for (std::size_t j = 0; j < width; ++j) out[j] += slot[j];
  }
}

}  // namespace mdfo
