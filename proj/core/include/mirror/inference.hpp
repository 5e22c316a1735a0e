#pragma once

#include <torch/torch.h>

#include <functional>
#include <string_view>
#include <vector>

#include "mirror/volume.hpp"

namespace mirror {

struct WindowSpec {
  Shape3 patch{96, 96, 96};
  /// Fraction of the patch shared by neighbouring tiles, in [0, 1).
  double overlap = 0.5;

  void validate() const;
};

/// Maps one pair of input tiles ([1, 1, d, h, w] each) to per-channel logits
/// [1, C, d, h, w]. Model-specific output selection lives in the callable.
using PatchPredictor = std::function<torch::Tensor(const torch::Tensor& x_a, const torch::Tensor& x_b)>;

/// Tile start offsets along one axis: stride max(1, floor(patch * (1 - overlap))),
/// with a final tile flush against the end. A single tile at 0 when the
/// axis is not longer than the patch.
std::vector<int64_t> tile_starts(int64_t extent, int64_t patch, double overlap);

/// Whole-volume per-channel probabilities: logistic of each tile's logits,
/// averaged with uniform weights over the tiles covering each voxel. Inputs
/// shorter than the patch are edge-padded; padding is cropped from the output.
std::vector<Volume> sliding_window_predict(const PatchPredictor& predictor, const Volume& x_a, const Volume& x_b,
                                           const WindowSpec& spec);

/// Voxel >= tau -> 1, else 0. tau must lie in (0, 1).
Volume binarize(const Volume& probs, double tau = 0.5);

enum class LateFusion { logit_sum, union_, intersection };
std::string_view to_string(LateFusion mode);
LateFusion parse_late_fusion(std::string_view text);

/// A branch prediction passed to late_fuse: real-valued logits or a binary mask.
struct Prediction {
  enum class Kind { logits, mask };
  Kind kind;
  Volume volume;

  static Prediction logits(Volume v) { return {Kind::logits, std::move(v)}; }
  static Prediction mask(Volume v) { return {Kind::mask, std::move(v)}; }
};

/// logit_sum: binarize(logistic(a + b), 0.5); union_: voxelwise OR;
/// intersection: voxelwise AND. Throws when the input kinds do not match the mode.
Volume late_fuse(const Prediction& a, const Prediction& b, LateFusion mode);

/// Whole tumor = core OR edema.
Volume combine_brain_masks(const Volume& core_mask, const Volume& edema_mask);

}  // namespace mirror
