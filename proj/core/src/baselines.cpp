#include "mirror/baselines.hpp"

#include <string>

namespace mirror {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::unimodal_ct: return "unimodal_ct";
    case BaselineKind::unimodal_pet: return "unimodal_pet";
    case BaselineKind::early_fusion: return "early_fusion";
    case BaselineKind::middle_fusion: return "middle_fusion";
    case BaselineKind::late_fusion_base: return "late_fusion_base";
  }
  return "unimodal_ct";
}

BaselineKind parse_baseline_kind(std::string_view text) {
  if (text == "unimodal_ct" || text == "ct") return BaselineKind::unimodal_ct;
  if (text == "unimodal_pet" || text == "pet") return BaselineKind::unimodal_pet;
  if (text == "early_fusion" || text == "ef") return BaselineKind::early_fusion;
  if (text == "middle_fusion" || text == "mf") return BaselineKind::middle_fusion;
  if (text == "late_fusion_base" || text == "lf") return BaselineKind::late_fusion_base;
  throw ConfigError("unknown baseline kind '" + std::string(text) + "'");
}

UnimodalNetImpl::UnimodalNetImpl(bool use_ct, const std::array<int64_t, 5>& widths) : use_ct_(use_ct) {
  net_ = register_module("net", Branch(1, 1, widths));
}

BranchOutputs UnimodalNetImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  BranchOutputs out;
  out.out_b = net_->forward(use_ct_ ? x_a : x_b);
  return out;
}

EarlyFusionNetImpl::EarlyFusionNetImpl(const std::array<int64_t, 5>& widths) {
  net_ = register_module("net", Branch(2, 1, widths));
}

BranchOutputs EarlyFusionNetImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  TORCH_CHECK(x_a.sizes() == x_b.sizes(), "shape mismatch between x_a and x_b");
  BranchOutputs out;
  out.out_b = net_->forward(torch::cat({x_a, x_b}, 1));
  return out;
}

MiddleFusionNetImpl::MiddleFusionNetImpl(const std::array<int64_t, 5>& w) {
  const std::array<StageOptions, 5> enc{{
      {1, w[0], 1, false, 0, false},
      {w[0], w[1], 2, false, 0, false},
      {w[1], w[2], 2, false, 0, false},
      {w[2], w[3], 2, false, 0, false},
      {w[3], w[4], 2, false, 0, true},
  }};
  for (int s = 0; s < 5; ++s) {
    const auto name = "stage" + std::to_string(s + 1);
    ct_encoder_.push_back(register_module("ct_encoder_" + name, Stage(enc[s])));
    pet_encoder_.push_back(register_module("pet_encoder_" + name, Stage(enc[s])));
  }
  const std::array<StageOptions, 4> dec{{
      {2 * w[4], w[3], 1, true, w[3], false},
      {w[3], w[2], 1, true, w[2], false},
      {w[2], w[1], 1, true, w[1], false},
      {w[1], w[0], 1, true, w[0], false},
  }};
  const std::array<const char*, 4> names{"stage6", "stage7", "stage8", "head"};
  for (int s = 0; s < 4; ++s) decoder_.push_back(register_module(names[s], Stage(dec[s])));
  out_ = register_module("out", torch::nn::Conv3d(torch::nn::Conv3dOptions(w[0], 1, 1)));
}

std::array<torch::Tensor, 5> MiddleFusionNetImpl::encode(std::vector<Stage>& encoder, const torch::Tensor& x) {
  std::array<torch::Tensor, 5> f;
  f[0] = encoder[0]->forward(x);
  for (int s = 1; s < 5; ++s) f[s] = encoder[s]->forward(f[s - 1]);
  return f;
}

BranchOutputs MiddleFusionNetImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  TORCH_CHECK(x_a.sizes() == x_b.sizes(), "shape mismatch between x_a and x_b");
  const auto fa = encode(ct_encoder_, x_a);
  const auto fb = encode(pet_encoder_, x_b);
  auto h = torch::cat({fa[4], fb[4]}, 1);
  for (int s = 0; s < 4; ++s) {
    const int skip = 3 - s;
    h = decoder_[s]->forward(h, 0.5 * (fa[skip] + fb[skip]));
  }
  BranchOutputs out;
  out.out_b = out_->forward(h);
  return out;
}

Stage MiddleFusionNetImpl::decoder_stage(int index) const {
  TORCH_CHECK(index >= 6 && index <= 8, "decoder stage index must be 6..8");
  return decoder_[index - 6];
}

LateFusionPairImpl::LateFusionPairImpl(const std::array<int64_t, 5>& widths) {
  ct_ = register_module("ct_model", std::make_shared<UnimodalNetImpl>(true, widths));
  pet_ = register_module("pet_model", std::make_shared<UnimodalNetImpl>(false, widths));
}

BranchOutputs LateFusionPairImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  BranchOutputs out;
  out.out_a = ct_->forward(x_a, x_b).out_b;
  out.out_b = pet_->forward(x_a, x_b).out_b;
  return out;
}

Network build_baseline(BaselineKind kind, const ModelConfig& config) {
  for (auto w : config.widths) {
    if (w < 1) throw ConfigError("stage widths must be positive");
  }
  Network net;
  switch (kind) {
    case BaselineKind::unimodal_ct: net = std::make_shared<UnimodalNetImpl>(true, config.widths); break;
    case BaselineKind::unimodal_pet: net = std::make_shared<UnimodalNetImpl>(false, config.widths); break;
    case BaselineKind::early_fusion: net = std::make_shared<EarlyFusionNetImpl>(config.widths); break;
    case BaselineKind::middle_fusion: net = std::make_shared<MiddleFusionNetImpl>(config.widths); break;
    case BaselineKind::late_fusion_base: net = std::make_shared<LateFusionPairImpl>(config.widths); break;
  }
  initialize_parameters(*net, config.seed);
  return net;
}

LossBreakdown baseline_loss(BaselineKind kind, const BranchOutputs& outputs, const torch::Tensor& y) {
  TORCH_CHECK(outputs.out_b.defined(), "baseline output missing");
  LossBreakdown b;
  auto seg = dice_ce_loss(outputs.out_b, y);
  if (kind == BaselineKind::late_fusion_base) {
    TORCH_CHECK(outputs.out_a.defined(), "late-fusion CT output missing");
    seg = seg + dice_ce_loss(outputs.out_a, y);
  }
  b.total = seg;
  b.seg = seg.item<double>();
  return b;
}

}  // namespace mirror
