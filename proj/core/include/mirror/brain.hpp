#pragma once

#include <torch/torch.h>

#include "mirror/model.hpp"
#include "mirror/volume.hpp"

namespace mirror {

/// Label map convention: 0 background, 1 edema, 2 enhancing core.
struct BrainTargets {
  torch::Tensor edema;  ///< y == 1
  torch::Tensor core;   ///< y == 2
  torch::Tensor whole;  ///< y >= 1
};

struct BrainMasks {
  Volume edema;
  Volume core;
  Volume whole;
};

/// Splits a label map into the three binary targets (float 0/1 tensors of the
/// same shape). Throws std::invalid_argument for labels outside {0,1,2}.
BrainTargets brain_targets(const torch::Tensor& labels);
BrainMasks brain_targets(const Volume& labels);

/// Final tumor mask of a v2-brain forward: binarise out_a (edema) and out_b
/// (core) logits at probability tau and return their union as a 0/1 tensor.
/// out_btl is ignored. Throws std::invalid_argument when a branch is missing.
torch::Tensor brain_final_mask(const BranchOutputs& outputs, double tau = 0.5);

}  // namespace mirror
