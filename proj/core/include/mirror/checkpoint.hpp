#pragma once

#include <filesystem>

#include "mirror/config.hpp"
#include "mirror/model.hpp"

namespace mirror {

/// Trained weights together with the configuration that built them and the
/// voxel spacing of the training data.
struct Checkpoint {
  TrainConfig config;
  Vec3 spacing{1.0, 1.0, 1.0};
  Network network;
};

/// Mirror U-Net for config.model (seeded with config.seed) or the configured baseline.
Network build_network(const TrainConfig& config);

/// Binary format: magic, config text, spacing, then every named parameter
/// (tied tensors appear under each branch's name) as little-endian float32.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mirror
