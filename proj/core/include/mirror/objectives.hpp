#pragma once

#include <torch/torch.h>

#include <string>

#include "mirror/model.hpp"

namespace mirror {

struct LossWeights {
  double lambda_rec = 1e-4;
  double lambda_seg = 0.5;
  double lambda_class = 1e-3;

  void validate() const;
};

/// Training targets for one batch, all [N, 1, D, H, W] except `label` ([N]).
struct LossTargets {
  torch::Tensor clean_a;  ///< uncorrupted branch-A input (reconstruction target)
  torch::Tensor x_b;      ///< branch-B input (bottleneck reconstruction target)
  torch::Tensor y;        ///< {0,1} mask, or {0,1,2} label map for brain versions
  torch::Tensor label;    ///< tumor presence c in {0,1}
};

/// Unweighted loss components plus their weighted sum.
///
/// rec_btl holds the bottleneck-decoder term: PET/T1Gd reconstruction, or
/// whole-tumor DiceCE for v2-brain.
struct LossBreakdown {
  torch::Tensor total;
  double seg = 0.0;
  double rec_branch = 0.0;
  double rec_btl = 0.0;
  double class_term = 0.0;
  bool has_rec_branch = false;
  bool has_rec_btl = false;
  bool has_class = false;

  [[nodiscard]] double total_value() const { return total.item<double>(); }
  [[nodiscard]] std::string describe() const;
};

inline constexpr double kDiceSmoothing = 1e-5;

/// Soft Dice loss on logistic(logits) plus voxel-mean binary cross-entropy.
/// Throws std::invalid_argument when the target holds values outside {0,1}.
torch::Tensor dice_ce_loss(const torch::Tensor& logits, const torch::Tensor& target);

/// Voxel-mean squared error.
torch::Tensor mse_loss(const torch::Tensor& recon, const torch::Tensor& target);

/// Binary cross-entropy on logistic(logit); c must be 0 or 1.
torch::Tensor bce_label_loss(const torch::Tensor& class_logit, const torch::Tensor& c);

/// Composes the loss of a Mirror U-Net version from its forward outputs.
///
///   v1: l_rec * mse(out_a, clean_a) + l_seg * dice_ce(out_b, y)
///   v2: v1 + l_rec * mse(out_btl, x_b)
///   v3: v2 + l_class * bce(class_logit, label)
///   v4: dice_ce((1 - theta) * out_b + theta * out_a, y)
///   v2-brain: l_seg * (dice_ce(out_a, edema) + dice_ce(out_b, core))
///             + l_seg * dice_ce(out_btl, whole)
///   v2-rec-brain: l_rec * mse(out_a, clean_a)
///             + l_seg * mean_c dice_ce(out_b[c], {edema, core, whole}[c])
///             + l_rec * mse(out_btl, x_b)
LossBreakdown version_loss(Version version, const BranchOutputs& outputs, const LossTargets& targets,
                           const LossWeights& weights);

}  // namespace mirror
