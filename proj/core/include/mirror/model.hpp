#pragma once

#include <torch/torch.h>

#include <array>
#include <initializer_list>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirror/volume.hpp"

namespace mirror {

/// Task combination trained on the two branches.
///
///   v1            CT branch reconstructs, PET branch segments.
///   v2            v1 + skip-free bottleneck decoder reconstructing PET.
///   v3            v2 + bottleneck tumor-presence classifier.
///   v4            both branches segment; logits fused with weight theta.
///   v2_brain      FLAIR->edema, T1Gd->core, bottleneck->whole tumor.
///   v2_rec_brain  FLAIR reconstruction, T1Gd 3-class segmentation,
///                 bottleneck reconstructs T1Gd.
enum class Version { v1, v2, v3, v4, v2_brain, v2_rec_brain };

std::string_view to_string(Version v);
Version parse_version(std::string_view text);
bool has_bottleneck_decoder(Version v);
bool has_classifier(Version v);
bool is_brain(Version v);
/// Output channels of branch B (3 for the brain reconstruction variant).
int64_t branch_b_channels(Version v);

/// Indices (1..8) of the stages whose parameters are tied across branches.
class StageIndexSet {
 public:
  static constexpr int kStageCount = 8;

  StageIndexSet() = default;
  StageIndexSet(std::initializer_list<int> indices);

  /// Accepts "5", "4,5,6", "4+5+6", "{4,5,6}", "none" or "".
  static StageIndexSet parse(std::string_view text);

  void insert(int index);
  [[nodiscard]] bool contains(int index) const { return indices_.count(index) > 0; }
  [[nodiscard]] bool empty() const { return indices_.empty(); }
  [[nodiscard]] const std::set<int>& indices() const { return indices_; }
  /// "4+5+6", or "none" for the empty set.
  [[nodiscard]] std::string to_string() const;

  bool operator==(const StageIndexSet&) const = default;
  auto operator<=>(const StageIndexSet& o) const { return indices_ <=> o.indices_; }

 private:
  std::set<int> indices_;
};

/// The seven sharing schemes compared in the weight-sharing grid.
const std::vector<StageIndexSet>& table2_shared_sets();

/// Logit fusion weight for v4: fixed in [0, 1] or learned as logistic(rho).
struct Theta {
  std::optional<double> fixed;
  bool learnable = false;

  [[nodiscard]] bool present() const { return fixed.has_value() || learnable; }
  /// "0.3", "learnable" or "" when absent.
  [[nodiscard]] std::string to_string() const;
  static Theta parse(std::string_view text);
};

struct ModelConfig {
  Version version = Version::v3;
  StageIndexSet shared{5};
  Theta theta;
  /// Channel widths of stage 1 (stem) and the four resolution levels.
  std::array<int64_t, 5> widths{16, 32, 64, 128, 256};
  Shape3 in_patch{96, 96, 96};
  uint64_t seed = 0;

  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

inline constexpr double kLearnableThetaInit = 0.25;

/// Convolution/normalisation stage; also the unit of parameter tying.
struct StageOptions {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  /// Stride of the first convolution (encoder stages).
  int64_t stride = 1;
  /// Decoder stage: x2 transposed convolution before the convolutions.
  bool upsample = false;
  /// Channels concatenated after upsampling (0 for skip-free decoders).
  int64_t skip_channels = 0;
  /// Adds a second stride-1 conv pair (the bottleneck stage).
  bool extra_block = false;
};

class StageImpl : public torch::nn::Module {
 public:
  explicit StageImpl(const StageOptions& options);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip = {});
  [[nodiscard]] const StageOptions& options() const { return options_; }

 private:
  StageOptions options_;
  torch::nn::ConvTranspose3d up_{nullptr};
  std::vector<torch::nn::Conv3d> convs_;
  std::vector<torch::nn::InstanceNorm3d> norms_;
};
TORCH_MODULE(Stage);

/// One modality branch: stages 1-5 encode, stages 6-8 plus the head decode
/// with skip connections from stages 4, 3, 2 and 1.
class BranchImpl : public torch::nn::Module {
 public:
  /// `reuse[l-1]`, when non-null, is registered as stage l instead of a
  /// fresh stage; this is how tying is realised.
  BranchImpl(int64_t in_channels, int64_t out_channels, const std::array<int64_t, 5>& widths,
             const std::array<std::shared_ptr<StageImpl>, 8>& reuse = {});

  std::array<torch::Tensor, 5> encode(const torch::Tensor& x);
  torch::Tensor decode(const std::array<torch::Tensor, 5>& features);
  torch::Tensor forward(const torch::Tensor& x) { return decode(encode(x)); }

  [[nodiscard]] Stage stage(int index) const;
  [[nodiscard]] Stage head() const { return head_; }

 private:
  std::vector<Stage> stages_;
  Stage head_{nullptr};
  torch::nn::Conv3d out_{nullptr};
};
TORCH_MODULE(Branch);

/// Decoder without skip inputs: mirrors stages 6-8 and the head, reading
/// only a bottleneck feature map.
class SkipFreeDecoderImpl : public torch::nn::Module {
 public:
  SkipFreeDecoderImpl(int64_t in_channels, int64_t out_channels, const std::array<int64_t, 5>& widths);
  torch::Tensor forward(const torch::Tensor& bottleneck);

 private:
  std::vector<Stage> stages_;
  torch::nn::Conv3d out_{nullptr};
};
TORCH_MODULE(SkipFreeDecoder);

/// Global average pool -> 64 hidden units -> 1 logit.
class ClassifierImpl : public torch::nn::Module {
 public:
  static constexpr int64_t kHidden = 64;
  explicit ClassifierImpl(int64_t in_channels);
  /// Logit of shape [N].
  torch::Tensor forward(const torch::Tensor& features);
  [[nodiscard]] int64_t in_channels() const { return in_channels_; }
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  int64_t in_channels_;
};
TORCH_MODULE(Classifier);

/// Per-forward outputs. Spatial shape of every tensor equals the input patch.
struct BranchOutputs {
  torch::Tensor out_a;  ///< branch A output [N, 1, D, H, W]; undefined for single-output baselines
  torch::Tensor out_b;  ///< branch B output [N, C, D, H, W]
  std::optional<torch::Tensor> out_btl;
  std::optional<torch::Tensor> class_logit;  ///< [N]
  std::optional<torch::Tensor> theta;        ///< v4 fusion weight (0-dim)
};

/// Common interface of Mirror U-Net and the fusion baselines.
class NetworkImpl : public torch::nn::Module {
 public:
  virtual BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) = 0;
};
using Network = std::shared_ptr<NetworkImpl>;

class MirrorUNetImpl : public NetworkImpl {
 public:
  explicit MirrorUNetImpl(const ModelConfig& config);

  BranchOutputs forward(const torch::Tensor& x_a, const torch::Tensor& x_b) override;

  /// Channel concatenation of both stage-5 outputs (branch A first).
  torch::Tensor shared_representation(const torch::Tensor& x_a, const torch::Tensor& x_b);
  /// Tumor probability in (0, 1), shape [N]. v3 only.
  torch::Tensor classify(const torch::Tensor& shared_rep);
  /// Current fusion weight (v4 only).
  [[nodiscard]] torch::Tensor theta() const;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const StageIndexSet& tied() const { return config_.shared; }
  [[nodiscard]] Branch branch_a() const { return branch_a_; }
  [[nodiscard]] Branch branch_b() const { return branch_b_; }
  [[nodiscard]] SkipFreeDecoder btl_decoder() const { return btl_; }
  [[nodiscard]] Classifier classifier() const { return classifier_; }

  /// True when every tied stage is the same storage in both branches.
  [[nodiscard]] bool verify_tying() const;

 private:
  ModelConfig config_;
  Branch branch_a_{nullptr};
  Branch branch_b_{nullptr};
  SkipFreeDecoder btl_{nullptr};
  Classifier classifier_{nullptr};
  torch::Tensor theta_rho_;
};
using MirrorUNet = std::shared_ptr<MirrorUNetImpl>;

/// Validates the config, builds the model and initialises it from config.seed.
MirrorUNet build_model(const ModelConfig& config);

/// (1 - theta) * pet + theta * ct.
torch::Tensor fuse_logits(const torch::Tensor& ct_logits, const torch::Tensor& pet_logits, double theta);
torch::Tensor fuse_logits(const torch::Tensor& ct_logits, const torch::Tensor& pet_logits, const torch::Tensor& theta);

/// Parameters with tied storage listed once, in registration order, under
/// their first name.
std::vector<std::pair<std::string, torch::Tensor>> unique_named_parameters(const torch::nn::Module& module);
int64_t parameter_count(const torch::nn::Module& module);

/// Deterministic initialisation from a seed: fan-in uniform for
/// convolution/linear weights, unit normalisation scales, zero biases.
void initialize_parameters(torch::nn::Module& module, uint64_t seed);

/// Volume -> [1, 1, D, H, W] float tensor.
torch::Tensor to_tensor(const Volume& volume);
/// [D, H, W] or [1, 1, D, H, W] tensor -> Volume with the given geometry.
Volume to_volume(const torch::Tensor& tensor, const Vec3& spacing = {1.0, 1.0, 1.0},
                 const Vec3& origin = {0.0, 0.0, 0.0});

}  // namespace mirror
