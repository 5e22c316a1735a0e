#pragma once

#include <filesystem>

#include "mirror/volume.hpp"

namespace mirror {

/// Reads a NIfTI-1 volume (.nii or .nii.gz). Values are scaled by
/// scl_slope/scl_inter when present; spacing comes from pixdim and the
/// origin from the sform (or qform) translation. Axis order is (W, H, D).
///
/// Throws std::runtime_error with "malformed header" or "non-3D payload".
Volume load_volume(const std::filesystem::path& path);

/// Writes a float32 NIfTI-1 volume; gzip-compressed when the path ends in .gz.
void save_volume(const Volume& volume, const std::filesystem::path& path);

/// Writes an integer label volume (uint8, or int16 when labels exceed 255).
/// Throws std::invalid_argument "mask must be integer-valued" otherwise.
void save_mask(const Volume& mask, const std::filesystem::path& path);

}  // namespace mirror
