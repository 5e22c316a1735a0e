#include "doctest.h"
#include "mirror/baselines.hpp"

using namespace mirror;

namespace {

ModelConfig small() {
  ModelConfig c;
  c.widths = {2, 4, 4, 8, 8};
  c.in_patch = {16, 16, 16};
  return c;
}

}  // namespace

TEST_CASE("baseline kinds parse with short aliases") {
  CHECK(parse_baseline_kind("pet") == BaselineKind::unimodal_pet);
  CHECK(parse_baseline_kind("middle_fusion") == BaselineKind::middle_fusion);
  CHECK(to_string(BaselineKind::late_fusion_base) == "late_fusion_base");
  CHECK_THROWS_AS(parse_baseline_kind("mid"), ConfigError);
}

TEST_CASE("early fusion differs from unimodal only by the extra input channel of the first convolution") {
  const auto c = small();
  const auto uni = build_baseline(BaselineKind::unimodal_ct, c);
  const auto ef = build_baseline(BaselineKind::early_fusion, c);
  CHECK(parameter_count(*ef) - parameter_count(*uni) == c.widths[0] * 27);
}

TEST_CASE("early fusion with a silenced second channel reproduces the unimodal function") {
  torch::NoGradGuard ng;
  const auto c = small();
  const auto uni = build_baseline(BaselineKind::unimodal_ct, c);
  const auto ef = build_baseline(BaselineKind::early_fusion, c);
  auto up = uni->named_parameters();
  auto ep = ef->named_parameters();
  REQUIRE(up.size() == ep.size());
  for (size_t n = 0; n < up.size(); ++n) {
    auto dst = ep[up.keys()[n]];
    const auto src = up.values()[n];
    if (dst.sizes() == src.sizes()) {
      dst.copy_(src);
    } else {
      dst.narrow(1, 0, 1).copy_(src);
      dst.narrow(1, 1, 1).zero_();
    }
  }
  const auto x = torch::rand({1, 1, 16, 16, 16});
  const auto out_uni = uni->forward(x, torch::rand_like(x)).out_b;
  const auto out_ef = ef->forward(x, torch::zeros_like(x)).out_b;
  CHECK(torch::allclose(out_uni, out_ef, 1e-5, 1e-6));
}

TEST_CASE("unimodal models never read the other modality") {
  torch::NoGradGuard ng;
  const auto c = small();
  const auto x = torch::rand({1, 1, 16, 16, 16});
  const auto poison = torch::full_like(x, std::numeric_limits<float>::quiet_NaN());
  const auto ct = build_baseline(BaselineKind::unimodal_ct, c);
  const auto pet = build_baseline(BaselineKind::unimodal_pet, c);
  CHECK(torch::isfinite(ct->forward(x, poison).out_b).all().item<bool>());
  CHECK(torch::isfinite(pet->forward(poison, x).out_b).all().item<bool>());
  CHECK_FALSE(torch::isfinite(ct->forward(poison, x).out_b).all().item<bool>());
}

TEST_CASE("middle fusion concatenates the two stage-5 outputs") {
  auto c = small();
  auto mf = std::dynamic_pointer_cast<MiddleFusionNetImpl>(build_baseline(BaselineKind::middle_fusion, c));
  REQUIRE(mf);
  CHECK(mf->decoder_stage(6)->options().in_channels == 2 * c.widths[4]);
  torch::NoGradGuard ng;
  const auto x = torch::rand({2, 1, 16, 16, 16});
  CHECK(mf->forward(x, x).out_b.sizes() == x.sizes());
}

TEST_CASE("late-fusion pair: independent models and summed loss") {
  const auto c = small();
  const auto lf = build_baseline(BaselineKind::late_fusion_base, c);
  const auto uni = build_baseline(BaselineKind::unimodal_ct, c);
  CHECK(parameter_count(*lf) == 2 * parameter_count(*uni));
  const auto x_a = torch::rand({1, 1, 16, 16, 16});
  const auto x_b = torch::rand({1, 1, 16, 16, 16});
  const auto y = (torch::rand({1, 1, 16, 16, 16}) > 0.9).to(torch::kFloat);
  const auto out = lf->forward(x_a, x_b);
  REQUIRE(out.out_a.defined());
  CHECK(out.out_a.sizes() == x_a.sizes());
  const auto loss = baseline_loss(BaselineKind::late_fusion_base, out, y);
  const double want = (dice_ce_loss(out.out_a, y) + dice_ce_loss(out.out_b, y)).item<double>();
  CHECK(loss.total_value() == doctest::Approx(want).epsilon(1e-6));
  // The CT model's gradient does not depend on the PET model's output.
  loss.total.backward();
  bool ct_grads = false;
  for (const auto& p : lf->named_parameters()) {
    if (p.key().rfind("ct_model", 0) == 0 && p.value().grad().defined()) ct_grads = true;
  }
  CHECK(ct_grads);
}

TEST_CASE("every baseline emits mask-shaped logits") {
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 1, 16, 16, 16});
  for (auto k : {BaselineKind::unimodal_ct, BaselineKind::unimodal_pet, BaselineKind::early_fusion,
                 BaselineKind::middle_fusion, BaselineKind::late_fusion_base}) {
    CHECK(build_baseline(k, small())->forward(x, x).out_b.sizes() == x.sizes());
  }
}
