#include "mdfo/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mdfo {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t mix(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t make_key(std::uint64_t master, std::uint64_t stream) {
  return mix(mix(master) ^ mix(stream + 0x632be59bd9b4e019ULL));
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      key_(make_key(master_seed, stream_id)) {}

RngStream RngStream::derive(std::uint64_t child_id) const {
  RngStream child;
  child.master_seed_ = master_seed_;
  child.stream_id_ = mix(stream_id_ ^ mix(child_id + 1));
  child.key_ = make_key(master_seed_, child.stream_id_);
  return child;
}

std::uint64_t RngStream::next_u64() { return mix(key_ + kGolden * counter_++); }

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_open_double() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  const double u1 = next_open_double();
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below: n must be >= 1");
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

}  // namespace mdfo
