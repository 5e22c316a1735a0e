#pragma once

#include <utility>

#include "mirror/volume.hpp"

namespace mirror {

enum class Interpolation { trilinear, nearest };

/// Resamples onto a grid with the requested spacing covering the same
/// physical extent. Output extent per axis is round(n * spacing / target),
/// at least 1; samples outside the source grid clamp to the edge.
Volume resample(const Volume& volume, const Vec3& target_spacing,
                Interpolation mode = Interpolation::trilinear);

/// Maps [lo, hi] affinely onto [0, 1] after clipping.
Volume clip_and_scale(const Volume& volume, double lo, double hi);

namespace autopet {
inline constexpr Vec3 kSpacing{2.0, 2.0, 3.0};
inline constexpr double kCtMin = -100.0;
inline constexpr double kCtMax = 250.0;
inline constexpr double kSuvMin = 0.0;
inline constexpr double kSuvMax = 15.0;
}  // namespace autopet

/// CT in HU and PET in SUV -> both resampled to 2x2x3 mm, clipped to
/// [-100, 250] HU and [0, 15] SUV, and scaled to [0, 1].
std::pair<Volume, Volume> preprocess_autopet(const Volume& ct, const Volume& pet_suv);

/// Resamples to 1 mm isotropic, then z-scores using the mean and standard
/// deviation of the nonzero voxels. Zero voxels (skull-stripped background)
/// stay zero. Throws std::invalid_argument "zero variance".
Volume preprocess_mri(const Volume& volume);

}  // namespace mirror
