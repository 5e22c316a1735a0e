#pragma once

#include <array>
#include <cstdint>

namespace mirror {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every random quantity in the library is drawn from this generator so that a
/// (seed, stream) pair yields the same sequence on every platform and
/// compiler. Distributions are implemented here too; the standard library's
/// distributions are not portable across implementations.
class Philox {
 public:
  explicit Philox(uint64_t seed, uint64_t stream = 0);

  uint32_t next_u32();
  uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// Unbiased integer in [0, n). n must be positive.
  uint64_t uniform_int(uint64_t n);

  /// Independent generator for a named sub-stream of this seed.
  [[nodiscard]] Philox fork(uint64_t stream) const;

  [[nodiscard]] uint64_t seed() const { return seed_; }

 private:
  void refill();

  uint64_t seed_;
  uint64_t stream_;
  std::array<uint32_t, 4> counter_{};
  std::array<uint32_t, 2> key_{};
  std::array<uint32_t, 4> block_{};
  int cursor_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace mirror
