#include "doctest.h"
#include "mirror/brain.hpp"
#include "mirror/inference.hpp"
#include "test_util.hpp"

using namespace mirror;

TEST_CASE("label maps split into edema, core and whole tumor") {
  Volume y({4, 4, 4});
  auto m = brain_targets(y);
  CHECK(count_nonzero(m.edema) + count_nonzero(m.core) + count_nonzero(m.whole) == 0);
  y.at(1, 2, 3) = 2.0f;
  m = brain_targets(y);
  CHECK(count_nonzero(m.core) == 1);
  CHECK(m.core.at(1, 2, 3) == 1.0f);
  CHECK(count_nonzero(m.edema) == 0);
  CHECK(count_nonzero(m.whole) == 1);
  y.at(0, 0, 0) = 3.0f;
  CHECK_THROWS_AS(brain_targets(y), std::invalid_argument);
}

TEST_CASE("whole tumor equals the voxelwise OR of edema and core") {
  Philox rng(31);
  for (int t = 0; t < 50; ++t) {
    Volume y({8, 8, 8});
    for (int64_t n = 0; n < y.size(); ++n) y[n] = static_cast<float>(rng.uniform_int(3));
    const auto m = brain_targets(y);
    const auto t_m = brain_targets(to_tensor(y));
    bool ok = true;
    for (int64_t n = 0; n < y.size(); ++n) {
      const bool e = y[n] == 1.0f, c = y[n] == 2.0f;
      ok = ok && m.edema[n] == (e ? 1.0f : 0.0f) && m.core[n] == (c ? 1.0f : 0.0f) &&
           m.whole[n] == ((e || c) ? 1.0f : 0.0f);
    }
    CHECK(ok);
    const auto combined = combine_brain_masks(m.core, m.edema);
    CHECK(std::equal(combined.values().begin(), combined.values().end(), m.whole.values().begin()));
    CHECK(torch::equal(t_m.whole, to_tensor(m.whole)));
  }
}

TEST_CASE("final brain mask is the union of the branch masks and ignores the bottleneck") {
  BranchOutputs o;
  o.out_a = torch::full({1, 1, 4, 4, 4}, -5.0);
  o.out_b = torch::full({1, 1, 4, 4, 4}, -5.0);
  CHECK(brain_final_mask(o).sum().item<double>() == 0.0);
  o.out_a.index_put_({0, 0, 0, 0, 0}, 5.0);
  o.out_b.index_put_({0, 0, 3, 3, 3}, 5.0);
  o.out_btl = torch::full({1, 1, 4, 4, 4}, 5.0);
  CHECK(brain_final_mask(o).sum().item<double>() == 2.0);
  o.out_btl = torch::full({1, 1, 4, 4, 4}, -5.0);
  CHECK(brain_final_mask(o).sum().item<double>() == 2.0);
  o.out_a = torch::Tensor();
  CHECK_THROWS_AS(brain_final_mask(o), std::invalid_argument);
}

TEST_CASE("perturbing the bottleneck decoder of a v2-brain model leaves the final mask unchanged") {
  torch::NoGradGuard ng;
  ModelConfig c;
  c.version = Version::v2_brain;
  c.widths = {2, 4, 4, 8, 8};
  c.in_patch = {16, 16, 16};
  auto m = build_model(c);
  const auto x_a = torch::randn({1, 1, 16, 16, 16});
  const auto x_b = torch::randn({1, 1, 16, 16, 16});
  const auto before_out = m->forward(x_a, x_b);
  const auto before = brain_final_mask(before_out);
  for (auto& p : m->btl_decoder()->parameters()) p.add_(torch::randn_like(p));
  const auto after_out = m->forward(x_a, x_b);
  CHECK_FALSE(torch::equal(*before_out.out_btl, *after_out.out_btl));
  CHECK(torch::equal(before, brain_final_mask(after_out)));
}
