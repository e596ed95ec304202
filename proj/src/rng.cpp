#include "mcmclab/rng.hpp"

#include <cmath>

namespace mcmclab {
namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  __extension__ using u128 = unsigned __int128;
  const u128 p = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline Philox4x64Block round(const Philox4x64Block& c, const Philox4x64Key& k) {
  std::uint64_t hi0, lo0, hi1, lo1;
  mulhilo(kMul0, c[0], hi0, lo0);
  mulhilo(kMul1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

Philox4x64Block philox4x64_10(Philox4x64Block counter, Philox4x64Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    counter = round(counter, key);
  }
  return counter;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_id(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ mix64(a + 0x632BE59BD9B4E019ULL));
  h = mix64(h ^ mix64(b + 0x8CB92BA72F3D8DD7ULL));
  return h;
}

RngStream::RngStream(std::uint64_t key_lo, std::uint64_t key_hi) : key_{key_lo, key_hi} {}

double RngStream::log_uniform() { return std::log(uniform()); }

void RngStream::refill() {
  buffer_ = philox4x64_10(counter_, key_);
  if (++counter_[0] == 0 && ++counter_[1] == 0 && ++counter_[2] == 0) ++counter_[3];
  pos_ = 0;
}

}  // namespace mcmclab
