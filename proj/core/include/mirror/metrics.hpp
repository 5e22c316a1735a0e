#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mirror/volume.hpp"

namespace mirror {

struct MetricsRecord {
  std::string case_id;
  double dice = 0.0;
  double fpv_ml = 0.0;
  double fnv_ml = 0.0;
};

/// 2|P & G| / (|P| + |G|); 1.0 when both masks are empty.
/// Throws std::invalid_argument on non-binary input or shape mismatch.
double dice_score(const Volume& pred, const Volume& gt);

struct Components {
  /// 0 for background, 1..count for foreground components (as floats).
  Volume labels;
  /// sizes[c - 1] is the voxel count of component c.
  std::vector<int64_t> sizes;

  [[nodiscard]] int64_t count() const { return static_cast<int64_t>(sizes.size()); }
};

/// Labels connected foreground regions; connectivity is 6, 18 or 26.
Components connected_components(const Volume& mask, int connectivity = 26);

struct FalseVolumes {
  double fpv_ml = 0.0;
  double fnv_ml = 0.0;
};

/// FPV: total volume of predicted components that do not touch the ground
/// truth. FNV: total volume of ground-truth components that no predicted
/// voxel touches. Reported in millilitres.
FalseVolumes fp_fn_volumes(const Volume& pred, const Volume& gt, int connectivity = 26);

MetricsRecord compute_metrics(const Volume& pred, const Volume& gt, std::string case_id = {},
                              int connectivity = 26);

/// Mean over records; case_id is "mean". Throws on an empty list.
MetricsRecord mean_metrics(const std::vector<MetricsRecord>& records);

/// "case_id,dice,fpv_ml,fnv_ml" rows followed by a "mean" row.
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& records);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);

}  // namespace mirror
