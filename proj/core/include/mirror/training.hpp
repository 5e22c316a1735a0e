#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mirror/checkpoint.hpp"
#include "mirror/config.hpp"
#include "mirror/inference.hpp"
#include "mirror/metrics.hpp"
#include "mirror/rng.hpp"

namespace mirror {

struct StepRecord {
  int64_t step = 0;
  int64_t epoch = 0;
  double total = 0.0;
  double seg = 0.0;
  double rec_branch = 0.0;
  double rec_btl = 0.0;
  double class_term = 0.0;
};

struct EpochRecord {
  int64_t epoch = 0;
  std::optional<MetricsRecord> val;
  double seconds = 0.0;
};

struct RunHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  void write_steps_csv(const std::filesystem::path& path) const;
  void write_epochs_csv(const std::filesystem::path& path) const;
};

/// Test and instrumentation callbacks. after_backward sees the gradients of
/// the step before the optimizer consumes them.
struct TrainHooks {
  std::function<void(int64_t step, NetworkImpl& network)> after_backward;
  std::function<void(int64_t step, NetworkImpl& network)> after_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  RunHistory history;
};

/// One optimisation batch of stacked patches, [N, 1, d, h, w] each.
struct Batch {
  torch::Tensor x_a;      ///< possibly corrupted branch-A input
  torch::Tensor clean_a;  ///< uncorrupted branch-A input
  torch::Tensor x_b;
  torch::Tensor y;
  torch::Tensor label;    ///< [N]
};

/// Draws one patch per entry of `indices` with the config's foreground bias
/// and applies the configured corruption to the branch-A patch.
Batch make_batch(const TrainConfig& cfg, const std::vector<MultimodalSample>& data, const std::vector<size_t>& indices,
                 Philox& sampling_rng, Philox& corruption_rng);

/// Parameter names split by optimizer group: convolution weights receive
/// weight decay; normalisation scales, biases, linear layers and theta do not.
struct DecaySplit {
  std::vector<std::string> decay;
  std::vector<std::string> no_decay;
};
DecaySplit weight_decay_split(const NetworkImpl& network);

/// Loss of one forward for the configured model family.
LossBreakdown compute_loss(const TrainConfig& cfg, const BranchOutputs& outputs, const Batch& batch);

/// Adam with constant learning rate; weight decay on convolution weights
/// only. Validates every cfg.val_every epochs and keeps the best weights by
/// mean validation Dice (or the final weights when validation is off).
/// Throws std::runtime_error on a non-finite loss, after printing the
/// offending loss breakdown to stderr.
TrainResult train_model(const TrainConfig& cfg, const std::vector<MultimodalSample>& train_set,
                        const std::vector<MultimodalSample>& val_set, const TrainHooks& hooks = {});

/// Selects the logits channels used at inference for the configured model:
/// branch B (v1-v3, baselines), fused logits (v4), [edema, core] (v2-brain),
/// three classes (v2-rec-brain), and the late-fusion pair per mode.
PatchPredictor make_predictor(const Network& network, const TrainConfig& cfg);

/// Turns per-channel probabilities into the final binary mask.
Volume final_mask(const TrainConfig& cfg, const std::vector<Volume>& probabilities);

/// Binary target used for scoring: the mask, or whole tumor for brain labels.
Volume evaluation_target(const TrainConfig& cfg, const MultimodalSample& sample);

Volume predict_mask(const Network& network, const TrainConfig& cfg, const MultimodalSample& sample);

struct Evaluation {
  std::vector<MetricsRecord> cases;
  MetricsRecord mean;
};

/// Scores an arbitrary mask predictor; throws on an empty dataset.
Evaluation evaluate_masks(const std::function<Volume(const MultimodalSample&)>& predict,
                          const std::function<Volume(const MultimodalSample&)>& target,
                          const std::vector<MultimodalSample>& dataset, int connectivity = 26);

/// Sliding-window inference and Dice/FPV/FNV for every case. Throws
/// ConfigError when a case's spacing differs from the checkpoint's.
Evaluation evaluate_model(const Checkpoint& checkpoint, const std::vector<MultimodalSample>& dataset);

}  // namespace mirror
