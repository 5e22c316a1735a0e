#include "mirror/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mirror/rng.hpp"

namespace mirror {

// ---------------------------------------------------------------------------
// Config types

std::string_view to_string(Version v) {
  switch (v) {
    case Version::v1: return "v1";
    case Version::v2: return "v2";
    case Version::v3: return "v3";
    case Version::v4: return "v4";
    case Version::v2_brain: return "v2-brain";
    case Version::v2_rec_brain: return "v2-rec-brain";
  }
  return "v1";
}

Version parse_version(std::string_view text) {
  if (text == "v1") return Version::v1;
  if (text == "v2") return Version::v2;
  if (text == "v3") return Version::v3;
  if (text == "v4") return Version::v4;
  if (text == "v2-brain" || text == "v2_brain") return Version::v2_brain;
  if (text == "v2-rec-brain" || text == "v2_rec_brain") return Version::v2_rec_brain;
  throw ConfigError("unknown version '" + std::string(text) + "'");
}

bool has_bottleneck_decoder(Version v) {
  return v == Version::v2 || v == Version::v3 || v == Version::v2_brain || v == Version::v2_rec_brain;
}
bool has_classifier(Version v) { return v == Version::v3; }
bool is_brain(Version v) { return v == Version::v2_brain || v == Version::v2_rec_brain; }
int64_t branch_b_channels(Version v) { return v == Version::v2_rec_brain ? 3 : 1; }

StageIndexSet::StageIndexSet(std::initializer_list<int> indices) {
  for (int i : indices) insert(i);
}

void StageIndexSet::insert(int index) {
  if (index < 1 || index > kStageCount) {
    throw ConfigError("invalid stage index " + std::to_string(index) + " (expected 1..8)");
  }
  indices_.insert(index);
}

StageIndexSet StageIndexSet::parse(std::string_view text) {
  StageIndexSet out;
  std::string s(text);
  std::erase_if(s, [](char c) { return c == '{' || c == '}' || c == ' '; });
  if (s.empty() || s == "none") return out;
  for (char& c : s) {
    if (c == '+' || c == ';' || c == '|') c = ',';
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("invalid stage index '" + item + "'");
    }
    out.insert(value);
  }
  return out;
}

std::string StageIndexSet::to_string() const {
  if (indices_.empty()) return "none";
  std::string out;
  for (int i : indices_) {
    if (!out.empty()) out += '+';
    out += std::to_string(i);
  }
  return out;
}

const std::vector<StageIndexSet>& table2_shared_sets() {
  static const std::vector<StageIndexSet> sets{{3}, {4}, {5}, {6}, {7}, {4, 5, 6}, {3, 4, 5, 6, 7}};
  return sets;
}

std::string Theta::to_string() const {
  if (learnable) return "learnable";
  if (!fixed) return "";
  std::ostringstream os;
  os << *fixed;
  return os.str();
}

Theta Theta::parse(std::string_view text) {
  Theta t;
  if (text.empty() || text == "none") return t;
  if (text == "learnable") {
    t.learnable = true;
    return t;
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("invalid theta '" + std::string(text) + "' (expected a number or 'learnable')");
  }
  t.fixed = value;
  return t;
}

void ModelConfig::validate() const {
  if (version == Version::v4) {
    if (!theta.present()) throw ConfigError("v4 requires theta (a value in [0,1] or 'learnable')");
    if (theta.fixed && (*theta.fixed < 0.0 || *theta.fixed > 1.0)) {
      throw ConfigError("theta must lie in [0, 1]");
    }
  } else if (theta.present()) {
    throw ConfigError("θ undefined for " + std::string(to_string(version)));
  }
  for (int i : shared.indices()) {
    if (i < 1 || i > StageIndexSet::kStageCount) throw ConfigError("invalid stage index " + std::to_string(i));
  }
  for (auto w : widths) {
    if (w < 1) throw ConfigError("stage widths must be positive");
  }
  for (auto n : in_patch) {
    if (n < 16 || n % 16 != 0) {
      throw ConfigError("patch not divisible by 16: " + mirror::to_string(in_patch));
    }
  }
}

// ---------------------------------------------------------------------------
// Modules

namespace {

torch::nn::Conv3d make_conv(int64_t in, int64_t out, int64_t stride) {
  return torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, 3).stride(stride).padding(1).bias(false));
}

torch::nn::InstanceNorm3d make_norm(int64_t channels) {
  return torch::nn::InstanceNorm3d(torch::nn::InstanceNorm3dOptions(channels).affine(true).track_running_stats(false));
}

}  // namespace

StageImpl::StageImpl(const StageOptions& options) : options_(options) {
  int64_t conv_in = options.in_channels;
  int64_t first_stride = options.stride;
  if (options.upsample) {
    up_ = register_module(
        "up", torch::nn::ConvTranspose3d(torch::nn::ConvTranspose3dOptions(options.in_channels, options.out_channels, 3)
                                             .stride(2)
                                             .padding(1)
                                             .output_padding(1)
                                             .bias(false)));
    conv_in = options.out_channels + options.skip_channels;
    first_stride = 1;
  }
  const int n_convs = options.extra_block ? 4 : 2;
  for (int c = 0; c < n_convs; ++c) {
    const auto in = c == 0 ? conv_in : options.out_channels;
    const auto stride = c == 0 ? first_stride : 1;
    convs_.push_back(register_module("conv" + std::to_string(c + 1), make_conv(in, options.out_channels, stride)));
    norms_.push_back(register_module("norm" + std::to_string(c + 1), make_norm(options.out_channels)));
  }
}

torch::Tensor StageImpl::forward(const torch::Tensor& x, const torch::Tensor& skip) {
  torch::Tensor h = x;
  if (options_.upsample) {
    h = up_->forward(h);
    if (options_.skip_channels > 0) {
      TORCH_CHECK(skip.defined(), "decoder stage expects a skip input");
      h = torch::cat({h, skip}, 1);
    }
  }
  for (size_t c = 0; c < convs_.size(); ++c) {
    h = torch::silu(norms_[c]->forward(convs_[c]->forward(h)));
  }
  return h;
}

BranchImpl::BranchImpl(int64_t in_channels, int64_t out_channels, const std::array<int64_t, 5>& w,
                       const std::array<std::shared_ptr<StageImpl>, 8>& reuse) {
  const std::array<StageOptions, 8> opts{{
      {in_channels, w[0], 1, false, 0, false},
      {w[0], w[1], 2, false, 0, false},
      {w[1], w[2], 2, false, 0, false},
      {w[2], w[3], 2, false, 0, false},
      {w[3], w[4], 2, false, 0, true},
      {w[4], w[3], 1, true, w[3], false},
      {w[3], w[2], 1, true, w[2], false},
      {w[2], w[1], 1, true, w[1], false},
  }};
  for (int s = 0; s < 8; ++s) {
    Stage stage = reuse[s] ? Stage(reuse[s]) : Stage(opts[s]);
    if (reuse[s]) {
      const auto& o = reuse[s]->options();
      TORCH_CHECK(o.in_channels == opts[s].in_channels && o.out_channels == opts[s].out_channels,
                  "tied stage ", s + 1, " has incompatible channel widths");
    }
    stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
  }
  head_ = register_module("head", Stage(StageOptions{w[1], w[0], 1, true, w[0], false}));
  out_ = register_module("out", torch::nn::Conv3d(torch::nn::Conv3dOptions(w[0], out_channels, 1)));
}

std::array<torch::Tensor, 5> BranchImpl::encode(const torch::Tensor& x) {
  std::array<torch::Tensor, 5> f;
  f[0] = stages_[0]->forward(x);
  for (int s = 1; s < 5; ++s) f[s] = stages_[s]->forward(f[s - 1]);
  return f;
}

torch::Tensor BranchImpl::decode(const std::array<torch::Tensor, 5>& f) {
  auto h = stages_[5]->forward(f[4], f[3]);
  h = stages_[6]->forward(h, f[2]);
  h = stages_[7]->forward(h, f[1]);
  h = head_->forward(h, f[0]);
  return out_->forward(h);
}

Stage BranchImpl::stage(int index) const {
  TORCH_CHECK(index >= 1 && index <= 8, "stage index out of range: ", index);
  return stages_[index - 1];
}

SkipFreeDecoderImpl::SkipFreeDecoderImpl(int64_t in_channels, int64_t out_channels,
                                         const std::array<int64_t, 5>& w) {
  const std::array<StageOptions, 4> opts{{
      {in_channels, w[3], 1, true, 0, false},
      {w[3], w[2], 1, true, 0, false},
      {w[2], w[1], 1, true, 0, false},
      {w[1], w[0], 1, true, 0, false},
  }};
  const std::array<const char*, 4> names{"stage6", "stage7", "stage8", "head"};
  for (int s = 0; s < 4; ++s) stages_.push_back(register_module(names[s], Stage(opts[s])));
  out_ = register_module("out", torch::nn::Conv3d(torch::nn::Conv3dOptions(w[0], out_channels, 1)));
}

torch::Tensor SkipFreeDecoderImpl::forward(const torch::Tensor& bottleneck) {
  auto h = bottleneck;
  for (auto& s : stages_) h = s->forward(h);
  return out_->forward(h);
}

ClassifierImpl::ClassifierImpl(int64_t in_channels) : in_channels_(in_channels) {
  fc1 = register_module("fc1", torch::nn::Linear(in_channels, kHidden));
  fc2 = register_module("fc2", torch::nn::Linear(kHidden, 1));
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& features) {
  TORCH_CHECK(features.dim() == 5, "classifier expects [N, C, D, H, W] features");
  TORCH_CHECK(features.size(1) == in_channels_, "classifier channel mismatch: expected ", in_channels_, ", got ",
              features.size(1));
  auto pooled = features.mean({2, 3, 4});
  return fc2->forward(torch::silu(fc1->forward(pooled))).squeeze(1);
}

MirrorUNetImpl::MirrorUNetImpl(const ModelConfig& config) : config_(config) {
  const auto& w = config.widths;
  branch_a_ = register_module("branchA", Branch(1, 1, w));
  std::array<std::shared_ptr<StageImpl>, 8> reuse{};
  for (int l : config.shared.indices()) reuse[l - 1] = branch_a_->stage(l).ptr();
  branch_b_ = register_module("branchB", Branch(1, branch_b_channels(config.version), w, reuse));
  if (has_bottleneck_decoder(config.version)) {
    btl_ = register_module("btl", SkipFreeDecoder(2 * w[4], 1, w));
  }
  if (has_classifier(config.version)) {
    classifier_ = register_module("classifier", Classifier(2 * w[4]));
  }
  if (config.version == Version::v4 && config.theta.learnable) {
    theta_rho_ = register_parameter("theta_rho", torch::zeros({}));
  }
}

torch::Tensor MirrorUNetImpl::theta() const {
  TORCH_CHECK(config_.version == Version::v4, "theta is defined for v4 only");
  if (config_.theta.learnable) return torch::sigmoid(theta_rho_);
  return torch::tensor(*config_.theta.fixed, torch::kFloat64).to(torch::kFloat32);
}

BranchOutputs MirrorUNetImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  TORCH_CHECK(x_a.sizes() == x_b.sizes(), "shape mismatch between x_a ", x_a.sizes(), " and x_b ", x_b.sizes());
  TORCH_CHECK(x_a.dim() == 5, "inputs must be [N, 1, D, H, W]");
  const auto fa = branch_a_->encode(x_a);
  const auto fb = branch_b_->encode(x_b);
  BranchOutputs out;
  out.out_a = branch_a_->decode(fa);
  out.out_b = branch_b_->decode(fb);
  if (btl_ || classifier_) {
    const auto shared = torch::cat({fa[4], fb[4]}, 1);
    if (btl_) out.out_btl = btl_->forward(shared);
    if (classifier_) out.class_logit = classifier_->forward(shared);
  }
  if (config_.version == Version::v4) out.theta = theta().to(x_a.dtype());
  return out;
}

torch::Tensor MirrorUNetImpl::shared_representation(const torch::Tensor& x_a, const torch::Tensor& x_b) {
  TORCH_CHECK(x_a.sizes() == x_b.sizes(), "shape mismatch between x_a ", x_a.sizes(), " and x_b ", x_b.sizes());
  return torch::cat({branch_a_->encode(x_a)[4], branch_b_->encode(x_b)[4]}, 1);
}

torch::Tensor MirrorUNetImpl::classify(const torch::Tensor& shared_rep) {
  TORCH_CHECK(classifier_, "this model has no classifier (v3 only)");
  return torch::sigmoid(classifier_->forward(shared_rep));
}

bool MirrorUNetImpl::verify_tying() const {
  for (int l : config_.shared.indices()) {
    const auto pa = branch_a_->stage(l)->parameters();
    const auto pb = branch_b_->stage(l)->parameters();
    if (pa.size() != pb.size()) return false;
    for (size_t n = 0; n < pa.size(); ++n) {
      if (pa[n].unsafeGetTensorImpl() != pb[n].unsafeGetTensorImpl()) return false;
    }
  }
  return true;
}

MirrorUNet build_model(const ModelConfig& config) {
  config.validate();
  auto model = std::make_shared<MirrorUNetImpl>(config);
  initialize_parameters(*model, config.seed);
  return model;
}

torch::Tensor fuse_logits(const torch::Tensor& ct_logits, const torch::Tensor& pet_logits, double theta) {
  TORCH_CHECK(ct_logits.sizes() == pet_logits.sizes(), "fuse_logits: shape mismatch ", ct_logits.sizes(), " vs ",
              pet_logits.sizes());
  return (1.0 - theta) * pet_logits + theta * ct_logits;
}

torch::Tensor fuse_logits(const torch::Tensor& ct_logits, const torch::Tensor& pet_logits, const torch::Tensor& theta) {
  TORCH_CHECK(ct_logits.sizes() == pet_logits.sizes(), "fuse_logits: shape mismatch ", ct_logits.sizes(), " vs ",
              pet_logits.sizes());
  return (1.0 - theta) * pet_logits + theta * ct_logits;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::pair<std::string, torch::Tensor>> unique_named_parameters(const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  std::unordered_set<const void*> seen;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    if (seen.insert(item.value().unsafeGetTensorImpl()).second) out.emplace_back(item.key(), item.value());
  }
  return out;
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& [name, p] : unique_named_parameters(module)) n += p.numel();
  return n;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void initialize_parameters(torch::nn::Module& module, uint64_t seed) {
  torch::NoGradGuard no_grad;
  Philox rng = Philox(seed).fork(0x1417);
  for (auto& [name, p] : unique_named_parameters(module)) {
    std::vector<float> values(static_cast<size_t>(p.numel()));
    if (ends_with(name, "theta_rho")) {
      std::fill(values.begin(), values.end(),
                static_cast<float>(std::log(kLearnableThetaInit / (1.0 - kLearnableThetaInit))));
    } else if (ends_with(name, ".bias")) {
      std::fill(values.begin(), values.end(), 0.0f);
    } else if (p.dim() >= 2) {
      // Fan-in as torch computes it: dim 1 times the receptive field.
      int64_t fan_in = p.size(1);
      for (int64_t d = 2; d < p.dim(); ++d) fan_in *= p.size(d);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
    } else {
      std::fill(values.begin(), values.end(), 1.0f);  // normalisation scales
    }
    auto src = torch::from_blob(values.data(), p.sizes(), torch::kFloat32);
    p.copy_(src);
  }
}

// ---------------------------------------------------------------------------
// Conversions

torch::Tensor to_tensor(const Volume& volume) {
  const auto& s = volume.shape();
  auto t = torch::empty({1, 1, s[2], s[1], s[0]}, torch::kFloat32);
  std::copy(volume.values().begin(), volume.values().end(), t.data_ptr<float>());
  return t;
}

Volume to_volume(const torch::Tensor& tensor, const Vec3& spacing, const Vec3& origin) {
  auto t = tensor.detach().to(torch::kFloat32).contiguous();
  if (t.dim() == 5) {
    TORCH_CHECK(t.size(0) == 1 && t.size(1) == 1, "to_volume expects a single-channel, single-item tensor");
    t = t.view({t.size(2), t.size(3), t.size(4)});
  }
  TORCH_CHECK(t.dim() == 3, "to_volume expects a 3D or 5D tensor");
  const Shape3 shape{t.size(2), t.size(1), t.size(0)};
  std::vector<float> values(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  return Volume(shape, std::move(values), spacing, origin);
}

}  // namespace mirror
