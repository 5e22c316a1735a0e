#include <cmath>

#include "doctest.h"
#include "mirror/inference.hpp"
#include "mirror/model.hpp"
#include "test_util.hpp"

using namespace mirror;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Independent tile enumeration: stride floor(p * (1 - overlap)) (at least 1),
// stepping while the tile fits, plus one tile flush with the end.
std::vector<int64_t> oracle_starts(int64_t n, int64_t p, double overlap) {
  if (n <= p) return {0};
  const auto stride = std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<double>(p) * (1.0 - overlap))));
  std::vector<int64_t> s;
  for (int64_t x = 0; x + p <= n; x += stride) s.push_back(x);
  if (s.back() != n - p) s.push_back(n - p);
  return s;
}

Volume index_volume(const Shape3& shape) {
  Volume v(shape);
  for (int64_t n = 0; n < v.size(); ++n) v[n] = static_cast<float>(n);
  return v;
}

}  // namespace

TEST_CASE("tile starts cover the axis and end flush") {
  CHECK(tile_starts(96, 96, 0.5) == std::vector<int64_t>{0});
  CHECK(tile_starts(20, 32, 0.5) == std::vector<int64_t>{0});
  CHECK((tile_starts(100, 32, 0.5) == std::vector<int64_t>{0, 16, 32, 48, 64, 68}));
  CHECK((tile_starts(64, 32, 0.0) == std::vector<int64_t>{0, 32}));
  for (int64_t n : {33, 47, 64, 97}) {
    for (double ov : {0.0, 0.25, 0.5, 0.9}) CHECK(tile_starts(n, 32, ov) == oracle_starts(n, 32, ov));
  }
  CHECK_THROWS((WindowSpec{{32, 32, 32}, 1.0}.validate()));
}

TEST_CASE("constant predictor gives a constant probability map") {
  const Volume v({40, 37, 33});
  const PatchPredictor stub = [](const torch::Tensor& a, const torch::Tensor&) { return torch::full_like(a, 1.5); };
  for (double ov : {0.0, 0.5, 0.75}) {
    const auto probs = sliding_window_predict(stub, v, v, {{16, 16, 16}, ov});
    REQUIRE(probs.size() == 1);
    CHECK(probs[0].shape() == v.shape());
    bool constant = true;
    for (float p : probs[0].values()) constant = constant && std::fabs(p - logistic(1.5)) < 1e-6;
    CHECK(constant);
  }
}

TEST_CASE("a single tile equals one forward pass") {
  Philox rng(3);
  const auto a = mirror::testing::random_volume({16, 16, 16}, rng);
  const auto b = mirror::testing::random_volume({16, 16, 16}, rng);
  const PatchPredictor f = [](const torch::Tensor& x, const torch::Tensor& y) { return 3.0 * x - 2.0 * y; };
  const auto probs = sliding_window_predict(f, a, b, {{16, 16, 16}, 0.5});
  const auto direct = torch::sigmoid(f(to_tensor(a), to_tensor(b)));
  CHECK(torch::allclose(to_tensor(probs[0]), direct, 0.0, 1e-7));
}

TEST_CASE("overlapping tiles average per voxel exactly as a coverage-count oracle") {
  const Shape3 shape{40, 30, 24};
  const Shape3 patch{16, 12, 8};
  const auto idx = index_volume(shape);
  auto tile_value = [&](int64_t flat) { return std::sin(0.001 * static_cast<double>(flat)) * 3.0; };
  // The stub identifies its tile by the index stored in the tile's first voxel.
  const PatchPredictor stub = [&](const torch::Tensor& a, const torch::Tensor&) {
    const auto first = static_cast<int64_t>(a.flatten()[0].item<float>());
    return torch::full_like(a, tile_value(first));
  };
  const auto probs = sliding_window_predict(stub, idx, idx, {patch, 0.5});

  std::vector<double> sum(idx.size(), 0.0);
  std::vector<int> hits(idx.size(), 0);
  for (auto k0 : oracle_starts(shape[2], patch[2], 0.5)) {
    for (auto j0 : oracle_starts(shape[1], patch[1], 0.5)) {
      for (auto i0 : oracle_starts(shape[0], patch[0], 0.5)) {
        const double p = logistic(tile_value(idx.index(i0, j0, k0)));
        for (int64_t k = k0; k < k0 + patch[2]; ++k) {
          for (int64_t j = j0; j < j0 + patch[1]; ++j) {
            for (int64_t i = i0; i < i0 + patch[0]; ++i) {
              sum[idx.index(i, j, k)] += p;
              ++hits[idx.index(i, j, k)];
            }
          }
        }
      }
    }
  }
  double worst = 0.0;
  for (int64_t n = 0; n < idx.size(); ++n) {
    REQUIRE(hits[n] > 0);
    worst = std::max(worst, std::fabs(probs[0][n] - sum[n] / hits[n]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("undersized volumes are edge padded and cropped back; multi-channel outputs") {
  const Volume v(Shape3{10, 12, 9}, Vec3{2.0, 2.0, 3.0}, {0, 0, 0}, 0.3f);
  const PatchPredictor two = [](const torch::Tensor& a, const torch::Tensor&) { return torch::cat({a, -a}, 1); };
  const auto probs = sliding_window_predict(two, v, v, {{16, 16, 16}, 0.5});
  REQUIRE(probs.size() == 2);
  CHECK(probs[0].shape() == v.shape());
  CHECK(probs[1].spacing() == v.spacing());
  CHECK(std::fabs(probs[0][0] - logistic(0.3)) < 1e-6);
  CHECK(std::fabs(probs[1][7] - logistic(-0.3)) < 1e-6);
}

TEST_CASE("binarize uses >= tau") {
  Volume p({3, 1, 1});
  p[0] = 0.5f;
  p[1] = 0.4f;
  p[2] = 0.6f;
  const auto m = binarize(p);
  CHECK(m[0] == 1.0f);
  CHECK(m[1] == 0.0f);
  CHECK(m[2] == 1.0f);
  CHECK_THROWS(binarize(p, 0.0));
  CHECK_THROWS(binarize(p, 1.0));
}

TEST_CASE("late fusion modes") {
  Volume a({4, 4, 4}), b({4, 4, 4});
  a.at(0, 0, 0) = 1.0f;
  b.at(3, 3, 3) = 1.0f;
  CHECK(count_nonzero(late_fuse(Prediction::mask(a), Prediction::mask(b), LateFusion::union_)) == 2);
  CHECK(count_nonzero(late_fuse(Prediction::mask(a), Prediction::mask(b), LateFusion::intersection)) == 0);

  Volume la(Shape3{1, 1, 1}, Vec3{1, 1, 1}, {0, 0, 0}, 2.0f), lb(Shape3{1, 1, 1}, Vec3{1, 1, 1}, Vec3{0, 0, 0}, -1.0f);
  CHECK(late_fuse(Prediction::logits(la), Prediction::logits(lb), LateFusion::logit_sum)[0] == 1.0f);
  CHECK_THROWS(late_fuse(Prediction::logits(la), Prediction::logits(lb), LateFusion::union_));
  CHECK_THROWS(late_fuse(Prediction::mask(a), Prediction::mask(b), LateFusion::logit_sum));

  Philox rng(21);
  for (int t = 0; t < 20; ++t) {
    const auto x = mirror::testing::random_mask({8, 8, 8}, 0.3, rng);
    const auto y = mirror::testing::random_mask({8, 8, 8}, 0.3, rng);
    const auto u = late_fuse(Prediction::mask(x), Prediction::mask(y), LateFusion::union_);
    const auto i = late_fuse(Prediction::mask(x), Prediction::mask(y), LateFusion::intersection);
    bool ok = true;
    for (int64_t n = 0; n < x.size(); ++n) {
      ok = ok && u[n] == ((x[n] != 0.0f || y[n] != 0.0f) ? 1.0f : 0.0f);
      ok = ok && i[n] == ((x[n] != 0.0f && y[n] != 0.0f) ? 1.0f : 0.0f);
    }
    CHECK(ok);
  }
  CHECK(parse_late_fusion("union") == LateFusion::union_);
  CHECK(parse_late_fusion(to_string(LateFusion::intersection)) == LateFusion::intersection);
  CHECK_THROWS(parse_late_fusion("xor"));
}

TEST_CASE("whole tumor combines core and edema") {
  Volume core({6, 6, 6}), edema({6, 6, 6});
  core.at(1, 1, 1) = 1.0f;
  edema.at(4, 4, 4) = edema.at(4, 4, 3) = 1.0f;
  CHECK(count_nonzero(combine_brain_masks(core, edema)) == 3);
  edema.at(1, 1, 1) = 1.0f;
  const auto absorbed = combine_brain_masks(core, edema);
  CHECK(std::equal(absorbed.values().begin(), absorbed.values().end(), edema.values().begin()));
}
