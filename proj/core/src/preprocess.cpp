#include "mirror/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mirror {

Volume resample(const Volume& volume, const Vec3& target_spacing, Interpolation mode) {
  const auto& in_shape = volume.shape();
  const auto& in_spacing = volume.spacing();
  if (target_spacing == in_spacing) return volume;

  Shape3 out_shape{};
  std::array<double, 3> step{};
  for (int a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(in_shape[a]) * in_spacing[a];
    out_shape[a] = std::max<int64_t>(1, std::llround(extent / target_spacing[a]));
    step[a] = target_spacing[a] / in_spacing[a];
  }
  Volume out(out_shape, target_spacing, volume.origin());

  auto clamp_index = [&](int64_t i, int a) { return std::clamp<int64_t>(i, 0, in_shape[a] - 1); };

  for (int64_t k = 0; k < out_shape[2]; ++k) {
    for (int64_t j = 0; j < out_shape[1]; ++j) {
      for (int64_t i = 0; i < out_shape[0]; ++i) {
        // Voxel centres are aligned at index 0 of both grids.
        const double x = i * step[0], y = j * step[1], z = k * step[2];
        if (mode == Interpolation::nearest) {
          out.at(i, j, k) = volume.at(clamp_index(std::llround(x), 0), clamp_index(std::llround(y), 1),
                                      clamp_index(std::llround(z), 2));
          continue;
        }
        const int64_t x0 = static_cast<int64_t>(std::floor(x));
        const int64_t y0 = static_cast<int64_t>(std::floor(y));
        const int64_t z0 = static_cast<int64_t>(std::floor(z));
        const double fx = x - x0, fy = y - y0, fz = z - z0;
        double acc = 0.0;
        for (int dz = 0; dz < 2; ++dz) {
          const double wz = dz ? fz : 1.0 - fz;
          if (wz == 0.0) continue;
          for (int dy = 0; dy < 2; ++dy) {
            const double wy = dy ? fy : 1.0 - fy;
            if (wy == 0.0) continue;
            for (int dx = 0; dx < 2; ++dx) {
              const double wx = dx ? fx : 1.0 - fx;
              if (wx == 0.0) continue;
              acc += wx * wy * wz *
                     volume.at(clamp_index(x0 + dx, 0), clamp_index(y0 + dy, 1), clamp_index(z0 + dz, 2));
            }
          }
        }
        out.at(i, j, k) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Volume clip_and_scale(const Volume& volume, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("clip range must satisfy lo < hi");
  Volume out = volume;
  for (auto& v : out.values()) {
    const double c = std::clamp(static_cast<double>(v), lo, hi);
    v = static_cast<float>((c - lo) / (hi - lo));
  }
  return out;
}

std::pair<Volume, Volume> preprocess_autopet(const Volume& ct, const Volume& pet_suv) {
  Volume ct_r = resample(ct, autopet::kSpacing, Interpolation::trilinear);
  Volume pet_r = resample(pet_suv, autopet::kSpacing, Interpolation::trilinear);
  if (ct_r.shape() != pet_r.shape()) {
    throw std::invalid_argument("CT and PET shapes differ after resampling: " + to_string(ct_r.shape()) +
                                " vs " + to_string(pet_r.shape()));
  }
  return {clip_and_scale(ct_r, autopet::kCtMin, autopet::kCtMax),
          clip_and_scale(pet_r, autopet::kSuvMin, autopet::kSuvMax)};
}

Volume preprocess_mri(const Volume& volume) {
  Volume out = resample(volume, {1.0, 1.0, 1.0}, Interpolation::trilinear);
  double sum = 0.0;
  int64_t n = 0;
  for (float v : out.values()) {
    if (v != 0.0f) {
      sum += v;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("zero variance: volume has no nonzero voxels");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (float v : out.values()) {
    if (v != 0.0f) ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 1e-12 * std::max(1.0, std::fabs(mean)))) {
    throw std::invalid_argument("zero variance: cannot z-score a constant volume");
  }
  for (auto& v : out.values()) {
    if (v != 0.0f) v = static_cast<float>((v - mean) / sd);
  }
  return out;
}

}  // namespace mirror
