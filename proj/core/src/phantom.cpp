#include "mirror/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mirror/rng.hpp"

namespace mirror {
namespace {

constexpr int kMaxPlacementAttempts = 100;

struct Sphere {
  Vec3 center;
  double radius;
};

struct Ellipsoid {
  Vec3 center;
  Vec3 semi_axes;

  // <= 1 inside.
  [[nodiscard]] double norm(const Vec3& p, double shrink = 0.0) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double axis = semi_axes[a] - shrink;
      if (axis <= 0.0) return 2.0;
      const double d = (p[a] - center[a]) / axis;
      s += d * d;
    }
    return s;
  }
};

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

Vec3 extent_mm(const Shape3& shape, const Vec3& spacing) {
  return {shape[0] * spacing[0], shape[1] * spacing[1], shape[2] * spacing[2]};
}

Vec3 voxel_position(int64_t i, int64_t j, int64_t k, const Vec3& spacing) {
  return {(i + 0.5) * spacing[0], (j + 0.5) * spacing[1], (k + 0.5) * spacing[2]};
}

Vec3 random_point_in(const Ellipsoid& body, double shrink, Philox& rng) {
  Vec3 p{};
  for (int a = 0; a < 3; ++a) {
    const double half = std::max(0.0, body.semi_axes[a] - shrink);
    p[a] = body.center[a] + rng.uniform(-half, half);
  }
  return p;
}

// Rejection-samples a sphere inside `body`, clear of `avoid` by `gap` mm.
bool place_sphere(const Ellipsoid& body, std::pair<double, double> radius_range,
                  const std::vector<Sphere>& avoid, double gap, Philox& rng, Sphere& out) {
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    const double r = rng.uniform(radius_range.first, radius_range.second);
    const Vec3 c = random_point_in(body, r, rng);
    if (body.norm(c, r) > 1.0) continue;
    bool clear = true;
    for (const auto& s : avoid) {
      if (distance(c, s.center) < r + s.radius + gap) {
        clear = false;
        break;
      }
    }
    if (clear) {
      out = {c, r};
      return true;
    }
  }
  return false;
}

double ct_texture(const Vec3& p) {
  constexpr double tau = 2.0 * std::numbers::pi;
  return 0.04 * std::sin(tau * p[0] / 41.0) * std::cos(tau * p[1] / 53.0) * std::sin(tau * p[2] / 37.0 + 1.0);
}

}  // namespace

void PhantomSpec::validate() const {
  for (auto n : shape) {
    if (n < 8) throw ConfigError("phantom shape must be at least 8 voxels per axis");
  }
  for (double s : spacing) {
    if (!(s > 0.0)) throw ConfigError("phantom spacing must be positive");
  }
  if (organ_count < 0 || lesion_count < 0) throw ConfigError("organ/lesion counts must be >= 0");
  if (!(lesion_radius_mm.first > 0.0 && lesion_radius_mm.first <= lesion_radius_mm.second)) {
    throw ConfigError("invalid lesion radius range");
  }
  if (!(organ_radius_mm.first > 0.0 && organ_radius_mm.first <= organ_radius_mm.second)) {
    throw ConfigError("invalid organ radius range");
  }
  if (organ_uptake < 0.6 || organ_uptake > 1.0 || lesion_uptake < 0.6 || lesion_uptake > 1.0) {
    throw ConfigError("organ and lesion uptake must lie in [0.6, 1] on the PET scale");
  }
  if (ct_lesion_contrast < 0.0 || ct_lesion_contrast > 0.1) {
    throw ConfigError("ct_lesion_contrast must lie in [0, 0.1]");
  }
  if (pet_noise < 0.0 || lesion_uptake - pet_noise < 0.9 * organ_uptake) {
    throw ConfigError("lesion uptake minus PET noise must stay >= 0.9 * organ uptake");
  }
}

MultimodalSample generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Philox placement = Philox(spec.seed).fork(1);
  Philox noise = Philox(spec.seed).fork(2);

  const Vec3 ext = extent_mm(spec.shape, spec.spacing);
  const Ellipsoid body{{ext[0] / 2, ext[1] / 2, ext[2] / 2}, {0.44 * ext[0], 0.40 * ext[1], 0.47 * ext[2]}};
  // Spine: a bright bony cylinder along z in the posterior body.
  const double spine_x = body.center[0];
  const double spine_y = body.center[1] + 0.55 * body.semi_axes[1];
  const double spine_r = 0.12 * body.semi_axes[0];

  std::vector<Sphere> organs;
  for (int n = 0; n < spec.organ_count; ++n) {
    Sphere s{};
    if (!place_sphere(body, spec.organ_radius_mm, organs, 4.0, placement, s)) {
      throw std::runtime_error("could not place organ " + std::to_string(n) + " inside the body");
    }
    organs.push_back(s);
  }
  std::vector<Sphere> lesions;
  for (int n = 0; n < spec.lesion_count; ++n) {
    std::vector<Sphere> avoid = organs;
    avoid.insert(avoid.end(), lesions.begin(), lesions.end());
    Sphere s{};
    if (!place_sphere(body, spec.lesion_radius_mm, avoid, 4.0, placement, s)) {
      throw std::runtime_error("could not place lesion " + std::to_string(n) + " inside the body after " +
                               std::to_string(kMaxPlacementAttempts) + " attempts");
    }
    lesions.push_back(s);
  }

  MultimodalSample out;
  out.x_a = Volume(spec.shape, spec.spacing);
  out.x_b = Volume(spec.shape, spec.spacing);
  out.y = Volume(spec.shape, spec.spacing);
  out.case_id = "phantom_" + std::to_string(spec.seed);

  auto inside_any = [](const std::vector<Sphere>& spheres, const Vec3& p) {
    for (const auto& s : spheres) {
      if (distance(p, s.center) <= s.radius) return true;
    }
    return false;
  };

  int64_t lesion_voxels = 0;
  for (int64_t k = 0; k < spec.shape[2]; ++k) {
    for (int64_t j = 0; j < spec.shape[1]; ++j) {
      for (int64_t i = 0; i < spec.shape[0]; ++i) {
        const Vec3 p = voxel_position(i, j, k, spec.spacing);
        if (body.norm(p) > 1.0) continue;  // air: 0 on both scales
        const double jitter = noise.uniform(-spec.pet_noise, spec.pet_noise);
        const double dspine = std::hypot(p[0] - spine_x, p[1] - spine_y);
        double ct = 0.40 + ct_texture(p);
        double pet = 0.08 + jitter;
        if (dspine <= spine_r) ct = 0.95;
        if (inside_any(organs, p)) {
          ct = 0.58 + 0.5 * ct_texture(p);
          pet = spec.organ_uptake + jitter;
        }
        if (inside_any(lesions, p)) {
          ct += spec.ct_lesion_contrast;
          pet = spec.lesion_uptake + jitter;
          out.y.at(i, j, k) = 1.0f;
          ++lesion_voxels;
        }
        out.x_a.at(i, j, k) = static_cast<float>(std::clamp(ct, 0.0, 1.0));
        out.x_b.at(i, j, k) = static_cast<float>(std::clamp(pet, 0.0, 1.0));
      }
    }
  }
  out.label = lesion_voxels > 0 ? 1 : 0;
  return out;
}

std::vector<PhantomSpec> phantom_cohort(const PhantomSpec& base, int count, double positive_fraction,
                                        int max_lesions, uint64_t seed) {
  if (count < 0) throw ConfigError("cohort size must be >= 0");
  if (positive_fraction < 0.0 || positive_fraction > 1.0) throw ConfigError("positive_fraction must lie in [0,1]");
  if (max_lesions < 1) throw ConfigError("max_lesions must be >= 1");
  Philox rng = Philox(seed).fork(7);
  std::vector<PhantomSpec> specs;
  specs.reserve(static_cast<size_t>(count));
  for (int n = 0; n < count; ++n) {
    PhantomSpec s = base;
    s.seed = rng.next_u64();
    const bool positive = rng.uniform() < positive_fraction;
    s.lesion_count = positive ? 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_lesions))) : 0;
    specs.push_back(s);
  }
  return specs;
}

void BrainPhantomSpec::validate() const {
  for (auto n : shape) {
    if (n < 16) throw ConfigError("brain phantom shape must be at least 16 voxels per axis");
  }
  for (double s : spacing) {
    if (!(s > 0.0)) throw ConfigError("brain phantom spacing must be positive");
  }
  if (!(edema_radius_mm.first > 0.0 && edema_radius_mm.first <= edema_radius_mm.second)) {
    throw ConfigError("invalid edema radius range");
  }
  if (!(core_fraction.first > 0.0 && core_fraction.first <= core_fraction.second && core_fraction.second < 1.0)) {
    throw ConfigError("core_fraction must satisfy 0 < lo <= hi < 1");
  }
}

MultimodalSample generate_brain_phantom(const BrainPhantomSpec& spec) {
  spec.validate();
  Philox placement = Philox(spec.seed).fork(1);
  Philox noise = Philox(spec.seed).fork(2);

  const Vec3 ext = extent_mm(spec.shape, spec.spacing);
  const Ellipsoid head{{ext[0] / 2, ext[1] / 2, ext[2] / 2}, {0.42 * ext[0], 0.45 * ext[1], 0.40 * ext[2]}};

  Sphere edema{};
  if (!place_sphere(head, spec.edema_radius_mm, {}, 0.0, placement, edema)) {
    throw std::runtime_error("could not place the tumor inside the head after " +
                             std::to_string(kMaxPlacementAttempts) + " attempts");
  }
  const double core_r = edema.radius * placement.uniform(spec.core_fraction.first, spec.core_fraction.second);
  // Offset the core while keeping it strictly inside the edema ball.
  const double slack = edema.radius - core_r;
  Vec3 core_c = edema.center;
  for (int a = 0; a < 3; ++a) core_c[a] += placement.uniform(-0.2, 0.2) * slack;
  // Mild anisotropy so the edema is not a perfect sphere.
  const Vec3 edema_scale{placement.uniform(0.85, 1.0), placement.uniform(0.85, 1.0), placement.uniform(0.85, 1.0)};

  MultimodalSample out;
  out.x_a = Volume(spec.shape, spec.spacing);
  out.x_b = Volume(spec.shape, spec.spacing);
  out.y = Volume(spec.shape, spec.spacing);
  out.case_id = "brain_" + std::to_string(spec.seed);

  for (int64_t k = 0; k < spec.shape[2]; ++k) {
    for (int64_t j = 0; j < spec.shape[1]; ++j) {
      for (int64_t i = 0; i < spec.shape[0]; ++i) {
        const Vec3 p = voxel_position(i, j, k, spec.spacing);
        if (head.norm(p) > 1.0) continue;
        const double jitter_a = noise.uniform(-0.02, 0.02);
        const double jitter_b = noise.uniform(-0.02, 0.02);
        double flair = 0.40 + ct_texture(p) + jitter_a;
        double t1gd = 0.45 - ct_texture(p) + jitter_b;
        double e = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double d = (p[a] - edema.center[a]) / (edema.radius * edema_scale[a]);
          e += d * d;
        }
        if (distance(p, core_c) <= core_r) {
          flair = 0.65 + jitter_a;
          t1gd = 0.95 + jitter_b;
          out.y.at(i, j, k) = 2.0f;
        } else if (e <= 1.0) {
          flair = 0.85 + jitter_a;
          t1gd = 0.42 + jitter_b;
          out.y.at(i, j, k) = 1.0f;
        }
        out.x_a.at(i, j, k) = static_cast<float>(flair);
        out.x_b.at(i, j, k) = static_cast<float>(t1gd);
      }
    }
  }
  out.label = count_nonzero(out.y) > 0 ? 1 : 0;
  return out;
}

}  // namespace mirror
