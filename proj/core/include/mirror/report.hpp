#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mirror/sweep.hpp"

namespace mirror {

struct ReportOptions {
  /// Tolerance of the version-ordering check, in Dice units (0.005 = 0.5 points).
  double epsilon = 0.005;
};

struct BoxStats {
  std::string group;
  int64_t n = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

/// Five-number summary with linearly interpolated quartiles.
BoxStats box_stats(std::string group, std::vector<double> values);

struct OrderingResult {
  Version lower;
  Version higher;
  int holds = 0;
  int compared = 0;
  /// "v2<v3: 7/7 L-sets"
  [[nodiscard]] std::string summary() const;
};

struct ReportBundle {
  std::vector<std::filesystem::path> files;
  std::vector<BoxStats> by_shared;
  std::vector<BoxStats> by_corruption;
  std::vector<OrderingResult> ordering;
  /// One line per expected (version, L, setting, seed) cell that is missing
  /// or did not finish.
  std::vector<std::string> warnings;
};

/// Aggregates sweep rows into per-L and per-corruption box-plot data (v1-v3
/// cells), per-version line data, the v1 <= v2 <= v3 ordering summary, the
/// theta-sensitivity table (v4 cells), a traceability list of every plotted
/// value, a warning manifest and SVG renderings, all under `output_dir`.
ReportBundle emit_report(const std::vector<SweepRow>& rows, const std::filesystem::path& output_dir,
                         const ReportOptions& options = {});
ReportBundle emit_report(const std::filesystem::path& sweep_csv, const std::filesystem::path& output_dir,
                         const ReportOptions& options = {});

}  // namespace mirror
