#include <cmath>
#include <set>

#include "doctest.h"
#include "mirror/rng.hpp"

using mirror::Philox;

TEST_CASE("philox matches the published known-answer vector for key 0, counter 0") {
  Philox rng(0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("equal seeds and streams reproduce; forks diverge") {
  Philox a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Philox base(42);
  auto f1 = base.fork(1);
  auto f1_again = base.fork(1);
  auto f2 = base.fork(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x = f1.next_u32();
    CHECK(x == f1_again.next_u32());
    same += x == f2.next_u32();
  }
  CHECK(same < 4);
}

TEST_CASE("uniform draws stay in [0, 1) and uniform_int in [0, n)") {
  Philox rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));

  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto k = rng.uniform_int(7);
    REQUIRE(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS(rng.uniform_int(0));
}

TEST_CASE("normal draws have zero mean and unit variance") {
  Philox rng(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(s2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}
