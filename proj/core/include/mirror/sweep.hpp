#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mirror/training.hpp"

namespace mirror {

/// One (version, shared set, setting, seed) combination. The setting is the
/// corruption for v1-v3 and theta for v4.
struct SweepCell {
  Version version = Version::v1;
  StageIndexSet shared;
  Corruption corruption = Corruption::none;
  Theta theta;
  uint64_t seed = 0;

  /// "none" / "noise" / "shuffle" for v1-v3, "0.3" / "learnable" for v4.
  [[nodiscard]] std::string setting() const;
};

struct SkippedCell {
  SweepCell cell;
  std::string reason;
};

struct SweepGrid {
  std::vector<SweepCell> cells;
  std::vector<SkippedCell> skipped;
};

/// The full weight-sharing grid: v1-v3 x 7 shared sets x 3 corruptions
/// (63 cells) plus v4 x 7 shared sets x 6 theta settings (42 cells), per seed.
SweepGrid table2_grid(const std::vector<uint64_t>& seeds = {0});

/// Cross product of the given axes. Incompatible combinations (theta for a
/// non-v4 version, corruption for v4, v4 without theta) are returned in
/// `skipped` with a reason such as "θ undefined for v1".
SweepGrid custom_grid(const std::vector<Version>& versions, const std::vector<StageIndexSet>& sets,
                      const std::vector<Corruption>& corruptions, const std::vector<Theta>& thetas,
                      const std::vector<uint64_t>& seeds);

/// `base` with the cell's version, shared set, setting and seed applied.
TrainConfig cell_config(const TrainConfig& base, const SweepCell& cell);

struct SweepRow {
  SweepCell cell;
  std::string status;  ///< "ok", "skipped" or "failed"
  std::string reason;
  MetricsRecord metrics;
  std::string history_path;
};

/// Trains and evaluates every cell in order, writing each run's history
/// under `output_dir`. Skipped cells produce rows with their reason; a cell
/// that throws is recorded as failed and the sweep continues.
std::vector<SweepRow> run_sweep(const TrainConfig& base, const SweepGrid& grid,
                                const std::vector<MultimodalSample>& train_set,
                                const std::vector<MultimodalSample>& val_set,
                                const std::vector<MultimodalSample>& test_set, const std::filesystem::path& output_dir,
                                const std::function<void(const SweepRow&)>& on_row = {});

/// version,shared,setting,seed,status,dice,fpv_ml,fnv_ml,history,reason
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// Table-shaped pivot: one row per (version, setting), one Dice column per
/// shared set (mean over seeds of successful cells).
void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace mirror
