#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mirror {

/// Invalid configuration or user input. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Grid extent as (W, H, D); W varies fastest in memory.
using Shape3 = std::array<int64_t, 3>;
/// Physical voxel size or origin in millimetres, per axis (W, H, D).
using Vec3 = std::array<double, 3>;

inline int64_t voxel_count(const Shape3& s) { return s[0] * s[1] * s[2]; }
std::string to_string(const Shape3& s);

/// Dense 3D scalar grid with physical geometry.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Shape3 shape, Vec3 spacing = {1.0, 1.0, 1.0}, Vec3 origin = {0.0, 0.0, 0.0},
                  float fill = 0.0f);
  Volume(Shape3 shape, std::vector<float> values, Vec3 spacing = {1.0, 1.0, 1.0},
         Vec3 origin = {0.0, 0.0, 0.0});

  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] const Vec3& spacing() const { return spacing_; }
  [[nodiscard]] const Vec3& origin() const { return origin_; }
  void set_spacing(const Vec3& spacing);
  void set_origin(const Vec3& origin) { origin_ = origin; }

  [[nodiscard]] int64_t size() const { return static_cast<int64_t>(values_.size()); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  [[nodiscard]] int64_t index(int64_t i, int64_t j, int64_t k) const {
    return i + shape_[0] * (j + shape_[1] * k);
  }
  [[nodiscard]] float at(int64_t i, int64_t j, int64_t k) const { return values_[index(i, j, k)]; }
  float& at(int64_t i, int64_t j, int64_t k) { return values_[index(i, j, k)]; }
  [[nodiscard]] float operator[](int64_t n) const { return values_[n]; }
  float& operator[](int64_t n) { return values_[n]; }

  [[nodiscard]] std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  /// Volume of one voxel in mm^3.
  [[nodiscard]] double voxel_volume_mm3() const { return spacing_[0] * spacing_[1] * spacing_[2]; }

  [[nodiscard]] bool same_grid(const Volume& other) const {
    return shape_ == other.shape_ && spacing_ == other.spacing_;
  }

 private:
  Shape3 shape_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  std::vector<float> values_;
};

/// True when every value is exactly 0 or 1.
bool is_binary(const Volume& v);
int64_t count_nonzero(const Volume& v);

/// Two aligned modality volumes plus their annotation.
///
/// x_a is the anatomical modality (CT or FLAIR), x_b the functional one
/// (PET or T1Gd). y holds {0,1} lesion masks for PET/CT or {0: background,
/// 1: edema, 2: core} label maps for the brain data. label is the
/// tumor-presence flag c.
struct MultimodalSample {
  Volume x_a;
  Volume x_b;
  Volume y;
  int label = 0;
  std::string case_id;

  void validate() const;
};

}  // namespace mirror
