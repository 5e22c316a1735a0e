#include <cmath>

#include "doctest.h"
#include "mirror/objectives.hpp"

using namespace mirror;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

struct RandomForward {
  BranchOutputs out;
  LossTargets targets;
};

RandomForward random_forward(int64_t n = 2, int64_t edge = 8) {
  RandomForward r;
  const std::vector<int64_t> shape{n, 1, edge, edge, edge};
  r.out.out_a = torch::randn(shape, kF64);
  r.out.out_b = 3.0 * torch::randn(shape, kF64);
  r.out.out_btl = torch::randn(shape, kF64);
  r.out.class_logit = torch::randn({n}, kF64);
  r.targets.clean_a = torch::rand(shape, kF64);
  r.targets.x_b = torch::rand(shape, kF64);
  r.targets.y = (torch::rand(shape, kF64) > 0.8).to(torch::kFloat64);
  r.targets.label = (torch::rand({n}, kF64) > 0.5).to(torch::kFloat64);
  return r;
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-12); }

}  // namespace

TEST_CASE("DiceCE closed forms") {
  const auto zeros = torch::zeros({1, 1, 5, 6, 7}, kF64);
  const auto ones = torch::ones({1, 1, 5, 6, 7}, kF64);
  const double n = 5 * 6 * 7;

  const double full = dice_ce_loss(zeros, ones).item<double>();
  const double dice_full = 1.0 - (2.0 * 0.5 * n + kDiceSmoothing) / (0.5 * n + n + kDiceSmoothing);
  CHECK(full == doctest::Approx(std::log(2.0) + dice_full).epsilon(1e-12));
  CHECK(full == doctest::Approx(1.0265).epsilon(1e-4));

  // Empty target: the smoothed Dice ratio is ~0, so its loss term is ~1.
  const double empty = dice_ce_loss(zeros, zeros).item<double>();
  const double ratio = kDiceSmoothing / (0.5 * n + kDiceSmoothing);
  CHECK(ratio < 1e-6);
  CHECK(empty == doctest::Approx(std::log(2.0) + 1.0 - ratio).epsilon(1e-12));

  auto y = torch::zeros({1, 1, 4, 4, 4}, kF64);
  y.index_put_({0, 0, 1}, 1.0);
  const auto saturated = 40.0 * (2.0 * y - 1.0);
  CHECK(dice_ce_loss(saturated, y).item<double>() < 1e-9);
  CHECK(dice_ce_loss(torch::randn({1, 1, 4, 4, 4}), torch::rand({1, 1, 4, 4, 4}).gt(0.5).to(torch::kFloat)).item<double>() >= 0.0);

  CHECK_THROWS_AS(dice_ce_loss(zeros, 0.5 * ones), std::invalid_argument);
}

TEST_CASE("MSE and label BCE") {
  const auto t = torch::rand({1, 1, 6, 6, 6}, kF64);
  CHECK(mirror::mse_loss(t, t).item<double>() == 0.0);
  CHECK(mirror::mse_loss(t + 0.1, t).item<double>() == doctest::Approx(0.01).epsilon(1e-9));
  const auto u = torch::rand({1, 1, 6, 6, 6}, kF64);
  double s = 0.0;
  const auto* pa = t.data_ptr<double>();
  const auto* pb = u.data_ptr<double>();
  for (int64_t i = 0; i < t.numel(); ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  CHECK(std::fabs(mirror::mse_loss(t, u).item<double>() - s / t.numel()) < 1e-7);

  CHECK(bce_label_loss(torch::zeros({1}, kF64), torch::ones({1}, kF64)).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_label_loss(torch::full({1}, 50.0, kF64), torch::ones({1}, kF64)).item<double>() < 1e-12);
  CHECK(bce_label_loss(torch::ones({1}, kF64), torch::zeros({1}, kF64)).item<double>() ==
        doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-12));
  CHECK_THROWS(bce_label_loss(torch::zeros({1}), torch::full({1}, 0.5)));
}

TEST_CASE("version losses compose additively") {
  const LossWeights w;
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = random_forward();
    const auto l1 = version_loss(Version::v1, r.out, r.targets, w);
    const auto l2 = version_loss(Version::v2, r.out, r.targets, w);
    const auto l3 = version_loss(Version::v3, r.out, r.targets, w);
    const double rec_btl = mirror::mse_loss(*r.out.out_btl, r.targets.x_b).item<double>();
    const double cls = bce_label_loss(*r.out.class_logit, r.targets.label).item<double>();
    CHECK(rel(l2.total_value(), l1.total_value() + w.lambda_rec * rec_btl) < 1e-6);
    CHECK(rel(l3.total_value(), l2.total_value() + w.lambda_class * cls) < 1e-6);
    CHECK(rel(l1.total_value(), w.lambda_rec * l1.rec_branch + w.lambda_seg * l1.seg) < 1e-12);
    CHECK(l1.has_rec_branch);
    CHECK_FALSE(l1.has_rec_btl);
    CHECK(l3.has_class);
  }
}

TEST_CASE("confident correct classifier adds almost nothing; zero weights drop terms") {
  auto r = random_forward();
  r.out.class_logit = 30.0 * (2.0 * r.targets.label - 1.0);
  const LossWeights w;
  const auto l2 = version_loss(Version::v2, r.out, r.targets, w);
  const auto l3 = version_loss(Version::v3, r.out, r.targets, w);
  CHECK(l3.class_term < 1e-3);
  CHECK(l3.total_value() == doctest::Approx(l2.total_value()).epsilon(1e-6));

  LossWeights no_rec = w;
  no_rec.lambda_rec = 0.0;
  const auto l1 = version_loss(Version::v1, r.out, r.targets, no_rec);
  CHECK(l1.total_value() == w.lambda_seg * dice_ce_loss(r.out.out_b, r.targets.y).item<double>());
}

TEST_CASE("v4 trains the fused logits; brain versions use the label map") {
  auto r = random_forward();
  r.out.theta = torch::tensor(0.3, kF64);
  const auto l4 = version_loss(Version::v4, r.out, r.targets, {});
  const auto fused = 0.7 * r.out.out_b + 0.3 * r.out.out_a;
  CHECK(l4.total_value() == doctest::Approx(dice_ce_loss(fused, r.targets.y).item<double>()).epsilon(1e-12));
  r.out.theta.reset();
  CHECK_THROWS(version_loss(Version::v4, r.out, r.targets, {}));

  auto b = random_forward();
  b.targets.y = torch::randint(0, 3, {2, 1, 8, 8, 8}, kF64);
  const auto edema = b.targets.y.eq(1).to(torch::kFloat64);
  const auto core = b.targets.y.eq(2).to(torch::kFloat64);
  const auto whole = b.targets.y.ge(1).to(torch::kFloat64);
  const LossWeights w;
  const auto lb = version_loss(Version::v2_brain, b.out, b.targets, w);
  const double want = w.lambda_seg * (dice_ce_loss(b.out.out_a, edema) + dice_ce_loss(b.out.out_b, core)).item<double>() +
                      w.lambda_seg * dice_ce_loss(*b.out.out_btl, whole).item<double>();
  CHECK(rel(lb.total_value(), want) < 1e-12);

  b.out.out_b = torch::randn({2, 3, 8, 8, 8}, kF64);
  const auto lr = version_loss(Version::v2_rec_brain, b.out, b.targets, w);
  const double seg = (dice_ce_loss(b.out.out_b.narrow(1, 0, 1), edema) + dice_ce_loss(b.out.out_b.narrow(1, 1, 1), core) +
                      dice_ce_loss(b.out.out_b.narrow(1, 2, 1), whole))
                         .item<double>() /
                     3.0;
  const double want_r = w.lambda_rec * mirror::mse_loss(b.out.out_a, b.targets.clean_a).item<double>() + w.lambda_seg * seg +
                        w.lambda_rec * mirror::mse_loss(*b.out.out_btl, b.targets.x_b).item<double>();
  CHECK(rel(lr.total_value(), want_r) < 1e-12);

  b.targets.y = b.targets.y + 1.0;  // labels up to 3
  CHECK_THROWS(version_loss(Version::v2_brain, b.out, b.targets, w));
}

TEST_CASE("loss weights must lie in [0, 1]") {
  CHECK_NOTHROW(LossWeights{}.validate());
  CHECK_THROWS_AS((LossWeights{1.5, 0.5, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((LossWeights{0.1, -0.5, 0.0}.validate()), ConfigError);
}
