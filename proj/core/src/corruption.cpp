#include "mirror/corruption.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "mirror/rng.hpp"

namespace mirror {

std::string_view to_string(Corruption c) {
  switch (c) {
    case Corruption::none: return "none";
    case Corruption::noise: return "noise";
    case Corruption::shuffle: return "shuffle";
  }
  return "none";
}

Corruption parse_corruption(std::string_view text) {
  if (text == "none" || text == "L2") return Corruption::none;
  if (text == "noise") return Corruption::noise;
  if (text == "shuffle" || text == "shuffling") return Corruption::shuffle;
  throw ConfigError("unknown corruption '" + std::string(text) + "' (expected none|noise|shuffle)");
}

Volume gaussian_corrupt(const Volume& volume, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("sigma must be >= 0");
  Volume out = volume;
  if (sigma == 0.0) return out;
  Philox rng(seed);
  for (auto& v : out.values()) {
    v = static_cast<float>(std::clamp(static_cast<double>(v) + sigma * rng.normal(), 0.0, 1.0));
  }
  return out;
}

namespace {

std::array<int64_t, 3> cube_grid(const Shape3& shape, int64_t edge) {
  if (edge < 1) throw std::invalid_argument("patch_edge must be positive");
  std::array<int64_t, 3> grid{};
  for (int a = 0; a < 3; ++a) {
    if (shape[a] % edge != 0) {
      throw std::invalid_argument("patch_edge " + std::to_string(edge) + " does not divide dimension " +
                                  std::to_string(shape[a]));
    }
    grid[a] = shape[a] / edge;
  }
  return grid;
}

}  // namespace

Volume apply_cube_permutation(const Volume& volume, int64_t patch_edge, const CubePermutation& permutation) {
  const auto grid = cube_grid(volume.shape(), patch_edge);
  const int64_t cubes = grid[0] * grid[1] * grid[2];
  if (static_cast<int64_t>(permutation.size()) != cubes) {
    throw std::invalid_argument("permutation size does not match the cube count");
  }
  std::vector<bool> seen(permutation.size(), false);
  for (auto p : permutation) {
    if (p < 0 || p >= cubes || seen[p]) throw std::invalid_argument("cube permutation is not a bijection");
    seen[p] = true;
  }
  Volume out(volume.shape(), volume.spacing(), volume.origin());
  for (int64_t dst = 0; dst < cubes; ++dst) {
    const int64_t src = permutation[dst];
    const std::array<int64_t, 3> d{dst % grid[0], (dst / grid[0]) % grid[1], dst / (grid[0] * grid[1])};
    const std::array<int64_t, 3> s{src % grid[0], (src / grid[0]) % grid[1], src / (grid[0] * grid[1])};
    for (int64_t k = 0; k < patch_edge; ++k) {
      for (int64_t j = 0; j < patch_edge; ++j) {
        for (int64_t i = 0; i < patch_edge; ++i) {
          out.at(d[0] * patch_edge + i, d[1] * patch_edge + j, d[2] * patch_edge + k) =
              volume.at(s[0] * patch_edge + i, s[1] * patch_edge + j, s[2] * patch_edge + k);
        }
      }
    }
  }
  return out;
}

CubePermutation invert_permutation(const CubePermutation& permutation) {
  CubePermutation inverse(permutation.size(), -1);
  for (size_t n = 0; n < permutation.size(); ++n) {
    const auto p = permutation[n];
    if (p < 0 || p >= static_cast<int64_t>(permutation.size()) || inverse[p] != -1) {
      throw std::invalid_argument("not a permutation");
    }
    inverse[p] = static_cast<int64_t>(n);
  }
  return inverse;
}

std::pair<Volume, CubePermutation> patch_shuffle(const Volume& volume, const ShuffleSpec& spec) {
  const auto grid = cube_grid(volume.shape(), spec.patch_edge);
  CubePermutation perm(static_cast<size_t>(grid[0] * grid[1] * grid[2]));
  std::iota(perm.begin(), perm.end(), 0);
  Philox rng(spec.permutation_seed);
  // Fisher-Yates.
  for (size_t n = perm.size(); n > 1; --n) {
    const auto m = static_cast<size_t>(rng.uniform_int(n));
    std::swap(perm[n - 1], perm[m]);
  }
  return {apply_cube_permutation(volume, spec.patch_edge, perm), perm};
}

Volume corrupt(const Volume& volume, const CorruptionParams& params, uint64_t seed) {
  switch (params.kind) {
    case Corruption::none: return volume;
    case Corruption::noise: return gaussian_corrupt(volume, params.sigma, seed);
    case Corruption::shuffle: return patch_shuffle(volume, {params.shuffle_edge, seed}).first;
  }
  return volume;
}

}  // namespace mirror
