#pragma once

#include <torch/torch.h>

#include <string_view>

#include "mirror/model.hpp"
#include "mirror/objectives.hpp"

namespace mirror {

/// Reference models sharing the Mirror U-Net backbone. All of them consume
/// (x_a = CT, x_b = PET) and report their segmentation logits in out_b; the
/// late-fusion pair additionally reports the CT model's logits in out_a.
enum class BaselineKind { unimodal_ct, unimodal_pet, early_fusion, middle_fusion, late_fusion_base };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(std::string_view text);

/// Single branch on one modality.
class UnimodalNetImpl : public NetworkImpl {
 public:
  UnimodalNetImpl(bool use_ct, const std::array<int64_t, 5>& widths);
  BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) override;
  [[nodiscard]] Branch net() const { return net_; }

 private:
  bool use_ct_;
  Branch net_{nullptr};
};

/// Single branch on the channel concatenation [CT, PET].
class EarlyFusionNetImpl : public NetworkImpl {
 public:
  explicit EarlyFusionNetImpl(const std::array<int64_t, 5>& widths);
  BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) override;
  [[nodiscard]] Branch net() const { return net_; }

 private:
  Branch net_{nullptr};
};

/// Two encoders (stages 1-5); the concatenated stage-5 outputs feed a single
/// decoder whose skips are the mean of the two encoders' features.
class MiddleFusionNetImpl : public NetworkImpl {
 public:
  explicit MiddleFusionNetImpl(const std::array<int64_t, 5>& widths);
  BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) override;
  [[nodiscard]] Stage decoder_stage(int index) const;

 private:
  static std::array<torch::Tensor, 5> encode(std::vector<Stage>& encoder, const torch::Tensor& x);
  std::vector<Stage> ct_encoder_;
  std::vector<Stage> pet_encoder_;
  std::vector<Stage> decoder_;  // stages 6, 7, 8 and the head
  torch::nn::Conv3d out_{nullptr};
};

/// Independently parameterised CT and PET unimodal models trained side by
/// side; outputs out_a = CT logits, out_b = PET logits.
class LateFusionPairImpl : public NetworkImpl {
 public:
  explicit LateFusionPairImpl(const std::array<int64_t, 5>& widths);
  BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) override;

 private:
  std::shared_ptr<UnimodalNetImpl> ct_;
  std::shared_ptr<UnimodalNetImpl> pet_;
};

/// Builds and initialises a baseline from the widths and seed of `config`.
Network build_baseline(BaselineKind kind, const ModelConfig& config);

/// DiceCE on out_b (and on out_a for the late-fusion pair, summed, which is
/// equivalent to training the two models independently).
LossBreakdown baseline_loss(BaselineKind kind, const BranchOutputs& outputs, const torch::Tensor& y);

}  // namespace mirror
