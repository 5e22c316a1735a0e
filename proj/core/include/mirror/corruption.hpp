#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirror/volume.hpp"

namespace mirror {

/// Self-supervision input transform applied to the reconstructed branch.
enum class Corruption { none, noise, shuffle };

std::string_view to_string(Corruption c);
Corruption parse_corruption(std::string_view text);

/// Adds i.i.d. N(0, sigma^2) noise and clips to [0, 1].
Volume gaussian_corrupt(const Volume& volume, double sigma, uint64_t seed);

struct ShuffleSpec {
  int64_t patch_edge = 16;
  uint64_t permutation_seed = 0;
};

/// Cube permutation: output cube n is filled from input cube permutation[n].
/// Cubes are numbered with the W axis fastest, matching voxel order.
using CubePermutation = std::vector<int64_t>;

/// Splits the volume into non-overlapping cubes of edge patch_edge and
/// permutes their positions with a uniformly random permutation.
std::pair<Volume, CubePermutation> patch_shuffle(const Volume& volume, const ShuffleSpec& spec);

/// Applies an explicit cube permutation (identity, swaps, or the inverse of
/// a previous shuffle).
Volume apply_cube_permutation(const Volume& volume, int64_t patch_edge, const CubePermutation& permutation);

CubePermutation invert_permutation(const CubePermutation& permutation);

struct CorruptionParams {
  Corruption kind = Corruption::none;
  double sigma = 0.1;
  int64_t shuffle_edge = 16;
};

/// Dispatches on params.kind; `none` returns the input unchanged.
Volume corrupt(const Volume& volume, const CorruptionParams& params, uint64_t seed);

}  // namespace mirror
