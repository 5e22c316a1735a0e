#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mirror/volume.hpp"

namespace mirror {

/// Synthetic whole-body PET/CT case on the preprocessed [0, 1] scale.
///
/// The PET volume contains hot organ spheres that are never labelled
/// (the physiological-uptake confound) plus hot lesion spheres that are.
/// Organs are clearly visible on CT; lesions barely are.
struct PhantomSpec {
  Shape3 shape{64, 64, 64};
  Vec3 spacing{2.0, 2.0, 3.0};
  int organ_count = 3;
  int lesion_count = 2;
  std::pair<double, double> lesion_radius_mm{5.0, 9.0};
  std::pair<double, double> organ_radius_mm{12.0, 18.0};
  double organ_uptake = 0.70;
  double lesion_uptake = 0.85;
  double ct_lesion_contrast = 0.05;
  /// Half-width of the uniform PET noise inside the body.
  double pet_noise = 0.02;
  uint64_t seed = 0;

  void validate() const;
};

/// Throws std::runtime_error when a lesion cannot be placed inside the body
/// (clear of organs and other lesions) within 100 attempts.
MultimodalSample generate_phantom(const PhantomSpec& spec);

/// Specs for a cohort in which each case is lesion-free with probability
/// 1 - positive_fraction; positive cases draw 1..max_lesions lesions.
std::vector<PhantomSpec> phantom_cohort(const PhantomSpec& base, int count, double positive_fraction,
                                        int max_lesions, uint64_t seed);

/// Synthetic brain MRI case: a tumor core nested inside an edema region.
/// x_a is FLAIR (edema bright), x_b is T1Gd (core enhancing); y holds
/// 0 background, 1 edema, 2 core. Intensities are raw (positive) and meant
/// to be z-scored by preprocess_mri.
struct BrainPhantomSpec {
  Shape3 shape{48, 48, 48};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::pair<double, double> edema_radius_mm{7.0, 11.0};
  /// Core radius as a fraction of the edema radius.
  std::pair<double, double> core_fraction{0.4, 0.65};
  uint64_t seed = 0;

  void validate() const;
};

MultimodalSample generate_brain_phantom(const BrainPhantomSpec& spec);

}  // namespace mirror
