#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace mcmclab {

using Philox4x64Block = std::array<std::uint64_t, 4>;
using Philox4x64Key = std::array<std::uint64_t, 2>;

/// Philox4x64-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure function of (counter, key).
Philox4x64Block philox4x64_10(Philox4x64Block counter, Philox4x64Key key);

/// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Hash of a master seed and two stream coordinates into a 64-bit stream id.
std::uint64_t stream_id(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b);

// Counter-based random stream. Every (key) names an independent stream of
// period 2^256 words, so chains can be seeded from their coordinates alone
// and run in any order or on any thread.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key_lo, std::uint64_t key_hi = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double log_uniform();
  double normal() { return normal_(*this); }

 private:
  void refill();

  Philox4x64Block counter_{};
  Philox4x64Key key_{};
  Philox4x64Block buffer_{};
  int pos_ = 4;
  boost::random::normal_distribution<double> normal_;
};

/// Stream for chain/path (a, b) under a master seed.
inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b = 0) {
  return RngStream(stream_id(master_seed, a, b), master_seed);
}

}  // namespace mcmclab
