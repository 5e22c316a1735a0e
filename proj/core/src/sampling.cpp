#include "mirror/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace mirror {

Volume crop(const Volume& volume, const PatchRegion& region, PadMode pad) {
  const auto& src = volume.shape();
  Volume out(region.shape, volume.spacing(), volume.origin());
  for (int64_t k = 0; k < region.shape[2]; ++k) {
    const int64_t sk = region.start[2] + k;
    for (int64_t j = 0; j < region.shape[1]; ++j) {
      const int64_t sj = region.start[1] + j;
      for (int64_t i = 0; i < region.shape[0]; ++i) {
        const int64_t si = region.start[0] + i;
        const bool inside = si >= 0 && si < src[0] && sj >= 0 && sj < src[1] && sk >= 0 && sk < src[2];
        if (inside) {
          out.at(i, j, k) = volume.at(si, sj, sk);
        } else if (pad == PadMode::edge) {
          out.at(i, j, k) = volume.at(std::clamp<int64_t>(si, 0, src[0] - 1), std::clamp<int64_t>(sj, 0, src[1] - 1),
                                      std::clamp<int64_t>(sk, 0, src[2] - 1));
        }
      }
    }
  }
  Vec3 origin = volume.origin();
  for (int a = 0; a < 3; ++a) origin[a] += static_cast<double>(region.start[a]) * volume.spacing()[a];
  out.set_origin(origin);
  return out;
}

SampledPatch sample_patch(const MultimodalSample& sample, const Shape3& patch_shape, double p_fg, Philox& rng) {
  if (p_fg < 0.0 || p_fg > 1.0) throw std::invalid_argument("p_fg must lie in [0, 1]");
  for (auto n : patch_shape) {
    if (n < 1) throw std::invalid_argument("patch dimensions must be positive");
  }
  const auto& shape = sample.y.shape();

  // Draw both decisions every time so the stream advances identically
  // whether or not foreground exists.
  const bool want_fg = rng.uniform() < p_fg;
  const uint64_t pick = rng.next_u64();

  std::array<int64_t, 3> center{};
  bool centred = false;
  if (want_fg) {
    const int64_t fg = count_nonzero(sample.y);
    if (fg > 0) {
      int64_t target = static_cast<int64_t>(pick % static_cast<uint64_t>(fg));
      const auto values = sample.y.values();
      for (int64_t n = 0; n < sample.y.size(); ++n) {
        if (values[n] != 0.0f && target-- == 0) {
          center = {n % shape[0], (n / shape[0]) % shape[1], n / (shape[0] * shape[1])};
          centred = true;
          break;
        }
      }
    }
  }
  if (!centred) {
    const auto n = static_cast<int64_t>(pick % static_cast<uint64_t>(voxel_count(shape)));
    center = {n % shape[0], (n / shape[0]) % shape[1], n / (shape[0] * shape[1])};
  }

  PatchRegion region;
  region.shape = patch_shape;
  for (int a = 0; a < 3; ++a) {
    if (shape[a] >= patch_shape[a]) {
      region.start[a] = std::clamp<int64_t>(center[a] - patch_shape[a] / 2, 0, shape[a] - patch_shape[a]);
    } else {
      // Undersized axis: centre the volume inside the padded patch.
      region.start[a] = -(patch_shape[a] - shape[a]) / 2;
    }
  }

  SampledPatch out;
  out.region = region;
  out.sample.x_a = crop(sample.x_a, region, PadMode::edge);
  out.sample.x_b = crop(sample.x_b, region, PadMode::edge);
  out.sample.y = crop(sample.y, region, PadMode::zero);
  out.sample.label = count_nonzero(out.sample.y) > 0 ? 1 : 0;
  out.sample.case_id = sample.case_id;
  return out;
}

SampledPatch sample_patch(const MultimodalSample& sample, const Shape3& patch_shape, double p_fg, uint64_t seed) {
  Philox rng(seed);
  return sample_patch(sample, patch_shape, p_fg, rng);
}

}  // namespace mirror
