#ifndef MDFO_PARALLEL_HPP
#define MDFO_PARALLEL_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace mdfo {

/// Thread cap for all OpenMP regions. Reads MANIFOLD_DFO_THREADS each call;
/// falls back to the OpenMP default when unset or invalid.
int thread_cap();

/// True when compiled with OpenMP and the cap allows more than one thread.
bool parallel_enabled();

/// Runs fn(i) for i in [0, n). Iterations must be independent; each writes
/// only its own output slot, so the result is identical for any thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn);

namespace detail {
void parallel_for_impl(int n, void (*trampoline)(void*, int), void* ctx);
}

template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  auto trampoline = [](void* ctx, int i) { (*static_cast<Fn*>(ctx))(i); };
  detail::parallel_for_impl(n, trampoline, &fn);
}

/// Fixed chunk width shared by the deterministic reductions below. Part of
/// the numeric contract: changing it changes rounding.
inline constexpr std::size_t kReduceChunk = 64;

/// Sum with a fixed reduction tree: in-order partial sums over kReduceChunk
/// blocks, then an in-order fold of the block sums. Bitwise identical for
/// any thread count; chunk partials may be computed in parallel.
double det_sum(std::span<const double> xs);

/// Serial reference: plain left-to-right fold. Kept for tests and the
/// kernel benchmark; differs from det_sum by rounding only.
double serial_sum(std::span<const double> xs);

/// Accumulates n contributions of equal width into out (resized to width).
/// emit(i, slot) must add contribution i into slot (width doubles).
/// Deterministic chunked reduction as det_sum; chunks run in parallel.
void det_accumulate(std::size_t n, std::size_t width,
                    void (*emit)(void*, std::size_t, double*), void* ctx,
                    std::vector<double>& out);

/// Serial reference for det_accumulate: single buffer, in-order emission.
void serial_accumulate(std::size_t n, std::size_t width,
                       void (*emit)(void*, std::size_t, double*), void* ctx,
                       std::vector<double>& out);

}  // namespace mdfo

#endif  // MDFO_PARALLEL_HPP
