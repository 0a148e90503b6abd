#pragma once

#include <cmath>
#include <cstdint>

namespace pilotwave {

/// Counter-based SplitMix64 stream.
///
/// Draw k of a stream with key K is mix64(K + (k + 1) * 0x9e3779b97f4a7c15), where mix64 is the
/// SplitMix64 finalizer. Keys are derived from (seed, stream id) by the same finalizer, so
/// `split` yields independent, reproducible substreams without shared state. Only integer
/// arithmetic is involved, so sequences are identical across platforms and compilers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(mix64(seed) ^ (stream * kGamma + kStreamSalt))) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exp(1) by inversion.
  double exponential() { return -std::log1p(-uniform()); }

  /// Independent child stream; does not advance this stream.
  CounterRng split(std::uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix64(key_ ^ mix64(stream * kGamma + kStreamSalt));
    return child;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kStreamSalt = 0x632be59bd9b4e019ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pilotwave
