#pragma once

#include "mirror/rng.hpp"
#include "mirror/volume.hpp"

namespace mirror {

/// Start index (may be negative or run past the end, in which case the crop
/// is padded) of a patch inside its source volume.
struct PatchRegion {
  std::array<int64_t, 3> start{0, 0, 0};
  Shape3 shape{0, 0, 0};

  [[nodiscard]] bool contains(int64_t i, int64_t j, int64_t k) const {
    return i >= start[0] && i < start[0] + shape[0] && j >= start[1] && j < start[1] + shape[1] &&
           k >= start[2] && k < start[2] + shape[2];
  }
};

enum class PadMode { edge, zero };

/// Copies `region` out of `volume`; out-of-range voxels replicate the nearest
/// edge value or read as zero.
Volume crop(const Volume& volume, const PatchRegion& region, PadMode pad);

struct SampledPatch {
  MultimodalSample sample;
  PatchRegion region;
};

/// Foreground-biased patch sampling: with probability p_fg (and when the
/// mask has any foreground) the patch is centred on a uniformly chosen
/// foreground voxel, otherwise on a uniform voxel. The window is then shifted
/// to lie inside the volume where it fits. Images pad with edge values and
/// the mask with zeros. The patch label is recomputed from the cropped mask.
SampledPatch sample_patch(const MultimodalSample& sample, const Shape3& patch_shape, double p_fg, Philox& rng);
SampledPatch sample_patch(const MultimodalSample& sample, const Shape3& patch_shape, double p_fg, uint64_t seed);

}  // namespace mirror
