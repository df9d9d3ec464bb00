#include <cmath>
#include <limits>
#include <stdexcept>

#include "kawasaki/kmc.hpp"

namespace kawasaki {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t(a) * b;
  hi = std::uint32_t(p >> 32);
  lo = std::uint32_t(p);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

void Rng::refill() {
  const PhiloxCounter ctr{std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(stream_),
                          std::uint32_t(stream_ >> 32)};
  buf_ = philox4x32_10(ctr, {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
  ++block_;
  used_ = 0;
}

Rng::result_type Rng::operator()() {
  if (used_ == 4) refill();
  return buf_[used_++];
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t hi = (*this)();
  return (hi << 32) | (*this)();
}

double Rng::uniform() {
  return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("Rng::exponential: rate must be positive");
  return -std::log(uniform()) / rate;
}

std::uint64_t Rng::below(std::uint64_t m) {
  if (m == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % m;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % m;
  }
}

}  // namespace kawasaki
