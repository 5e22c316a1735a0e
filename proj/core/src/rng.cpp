#include "mirror/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mirror {
namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

std::array<uint32_t, 4> philox_block(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace

Philox::Philox(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  counter_ = {0u, 0u, static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
}

void Philox::refill() {
  block_ = philox_block(counter_, key_);
  // 64-bit block counter in the low words; the stream id occupies the high words.
  if (++counter_[0] == 0) ++counter_[1];
  cursor_ = 0;
}

uint32_t Philox::next_u32() {
  if (cursor_ == 4) refill();
  return block_[cursor_++];
}

uint64_t Philox::next_u64() {
  const uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Philox::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Philox::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(phi);
  has_spare_normal_ = true;
  return r * std::cos(phi);
}

uint64_t Philox::uniform_int(uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

Philox Philox::fork(uint64_t stream) const {
  // Mix the parent stream in so fork(a).fork(b) != fork(b).fork(a).
  const uint64_t mixed = (stream_ * 0x9E3779B97F4A7C15ull) ^ (stream + 0x632BE59BD9B4E019ull);
  return Philox(seed_, mixed);
}

}  // namespace mirror
