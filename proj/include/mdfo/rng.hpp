#ifndef MDFO_RNG_HPP
#define MDFO_RNG_HPP

#include <cstdint>

namespace mdfo {

/// Counter-based random stream. Output is a pure function of
/// (master_seed, stream_id, counter), so derived streams can be handed to
/// parallel workers in any order without changing the numbers they produce.
///
/// Mixing uses the splitmix64 finalizer; gaussians are Box-Muller with a
/// fixed two-uniform consumption per draw (no cached spare), which keeps the
/// sequence identical across platforms and call patterns.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0);

  /// Child stream keyed by (this stream, child_id). Deterministic; does not
  /// advance this stream's counter.
  RngStream derive(std::uint64_t child_id) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  /// Uniform in (0, 1]; safe to pass to log().
  double next_open_double();
  /// Standard normal draw; consumes exactly two uniforms.
  double next_gaussian();
  /// Uniform integer in [0, n); n must be >= 1.
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t master_seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace mdfo

#endif  // MDFO_RNG_HPP
