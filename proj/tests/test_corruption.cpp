#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mirror/corruption.hpp"
#include "test_util.hpp"

using namespace mirror;

namespace {

bool same_values(const Volume& a, const Volume& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

}  // namespace

TEST_CASE("gaussian noise: sigma 0 is the identity, outputs are clipped to [0, 1]") {
  Philox rng(1);
  const auto v = mirror::testing::random_volume({16, 16, 16}, rng);
  CHECK(same_values(gaussian_corrupt(v, 0.0, 5), v));
  const auto loud = gaussian_corrupt(v, 2.0, 5);
  for (float x : loud.values()) REQUIRE((x >= 0.0f && x <= 1.0f));
  CHECK(same_values(gaussian_corrupt(v, 0.3, 9), gaussian_corrupt(v, 0.3, 9)));
}

TEST_CASE("gaussian noise: mean |out - in| at sigma 0.1 is 0.1 sqrt(2/pi)") {
  const Volume v(Shape3{128, 128, 64}, Vec3{1, 1, 1}, {0, 0, 0}, 0.5f);
  const auto out = gaussian_corrupt(v, 0.1, 2024);
  double s = 0.0;
  for (int64_t n = 0; n < v.size(); ++n) s += std::fabs(static_cast<double>(out[n]) - 0.5);
  const double expected = 0.1 * std::sqrt(2.0 / std::numbers::pi);
  CHECK(v.size() >= 1000000);
  CHECK(std::fabs(s / v.size() - expected) < 0.002);
}

TEST_CASE("patch shuffle preserves the multiset and inverts exactly") {
  Philox rng(4);
  const auto v = mirror::testing::random_volume({32, 32, 48}, rng);
  for (uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto [out, perm] = patch_shuffle(v, {16, seed});
    CHECK(perm.size() == 2 * 2 * 3);
    std::vector<float> a(v.values().begin(), v.values().end()), b(out.values().begin(), out.values().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(same_values(apply_cube_permutation(out, 16, invert_permutation(perm)), v));
  }
}

TEST_CASE("identity and swap permutations") {
  Philox rng(6);
  const auto v = mirror::testing::random_volume({8, 4, 4}, rng);
  CHECK(same_values(apply_cube_permutation(v, 4, {0, 1}), v));
  const auto swapped = apply_cube_permutation(v, 4, {1, 0});
  bool exchanged = true;
  for (int64_t k = 0; k < 4; ++k) {
    for (int64_t j = 0; j < 4; ++j) {
      for (int64_t i = 0; i < 4; ++i) {
        exchanged = exchanged && swapped.at(i, j, k) == v.at(i + 4, j, k) && swapped.at(i + 4, j, k) == v.at(i, j, k);
      }
    }
  }
  CHECK(exchanged);
  CHECK_THROWS(apply_cube_permutation(v, 4, {0, 0}));
  CHECK_THROWS(apply_cube_permutation(v, 4, {0, 1, 2}));
}

TEST_CASE("corrupt dispatches on the kind") {
  Philox rng(8);
  const auto v = mirror::testing::random_volume({16, 16, 16}, rng);
  CHECK(same_values(corrupt(v, {Corruption::none, 0.1, 16}, 3), v));
  CHECK_FALSE(same_values(corrupt(v, {Corruption::noise, 0.1, 16}, 3), v));
  CHECK(same_values(corrupt(v, {Corruption::shuffle, 0.1, 16}, 3), v));  // a single cube
  CHECK(parse_corruption("shuffle") == Corruption::shuffle);
  CHECK(to_string(Corruption::noise) == "noise");
  CHECK_THROWS_AS(parse_corruption("blur"), ConfigError);
}
