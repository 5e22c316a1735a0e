#include "mirror/volume.hpp"

#include <algorithm>

namespace mirror {

std::string to_string(const Shape3& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

Volume::Volume(Shape3 shape, Vec3 spacing, Vec3 origin, float fill)
    : Volume(shape, std::vector<float>(), spacing, origin) {
  values_.assign(static_cast<size_t>(voxel_count(shape)), fill);
}

Volume::Volume(Shape3 shape, std::vector<float> values, Vec3 spacing, Vec3 origin)
    : shape_(shape), origin_(origin), values_(std::move(values)) {
  for (auto n : shape_) {
    if (n < 1) throw std::invalid_argument("volume dimensions must be >= 1, got " + to_string(shape_));
  }
  if (!values_.empty() && static_cast<int64_t>(values_.size()) != voxel_count(shape_)) {
    throw std::invalid_argument("volume value count does not match shape " + to_string(shape_));
  }
  set_spacing(spacing);
}

void Volume::set_spacing(const Vec3& spacing) {
  for (double s : spacing) {
    if (!(s > 0.0)) throw std::invalid_argument("voxel spacing must be strictly positive");
  }
  spacing_ = spacing;
}

bool is_binary(const Volume& v) {
  return std::all_of(v.values().begin(), v.values().end(),
                     [](float x) { return x == 0.0f || x == 1.0f; });
}

int64_t count_nonzero(const Volume& v) {
  return std::count_if(v.values().begin(), v.values().end(), [](float x) { return x != 0.0f; });
}

void MultimodalSample::validate() const {
  if (!x_a.same_grid(x_b) || !x_a.same_grid(y)) {
    throw std::invalid_argument("sample " + case_id + ": modalities and mask must share shape and spacing");
  }
  if (label != 0 && label != 1) throw std::invalid_argument("sample " + case_id + ": label must be 0 or 1");
  if ((count_nonzero(y) > 0) != (label == 1)) {
    throw std::invalid_argument("sample " + case_id + ": label disagrees with mask foreground");
  }
}

}  // namespace mirror
