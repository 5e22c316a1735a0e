#include "mirror/objectives.hpp"

#include <sstream>
#include <stdexcept>

#include "mirror/brain.hpp"

namespace mirror {

void LossWeights::validate() const {
  for (double w : {lambda_rec, lambda_seg, lambda_class}) {
    if (w < 0.0 || w > 1.0) throw ConfigError("loss weights must lie in [0, 1]");
  }
}

std::string LossBreakdown::describe() const {
  std::ostringstream os;
  os << "total=" << (total.defined() ? total_value() : 0.0) << " seg=" << seg;
  if (has_rec_branch) os << " rec_branch=" << rec_branch;
  if (has_rec_btl) os << " rec_btl=" << rec_btl;
  if (has_class) os << " class=" << class_term;
  return os.str();
}

torch::Tensor dice_ce_loss(const torch::Tensor& logits, const torch::Tensor& target) {
  if (logits.sizes() != target.sizes()) throw std::invalid_argument("dice_ce_loss: shape mismatch");
  {
    torch::NoGradGuard no_grad;
    if (target.ne(0).logical_and(target.ne(1)).any().item<bool>()) {
      throw std::invalid_argument("dice_ce_loss: target must contain only 0 and 1");
    }
  }
  const auto t = target.to(logits.dtype());
  const auto p = torch::sigmoid(logits);
  const auto intersection = (p * t).sum();
  const auto dice = 1.0 - (2.0 * intersection + kDiceSmoothing) / (p.sum() + t.sum() + kDiceSmoothing);
  const auto bce = torch::binary_cross_entropy_with_logits(logits, t);
  return dice + bce;
}

torch::Tensor mse_loss(const torch::Tensor& recon, const torch::Tensor& target) {
  if (recon.sizes() != target.sizes()) throw std::invalid_argument("mse_loss: shape mismatch");
  return (recon - target.to(recon.dtype())).square().mean();
}

torch::Tensor bce_label_loss(const torch::Tensor& class_logit, const torch::Tensor& c) {
  if (class_logit.sizes() != c.sizes()) throw std::invalid_argument("bce_label_loss: shape mismatch");
  {
    torch::NoGradGuard no_grad;
    if (c.ne(0).logical_and(c.ne(1)).any().item<bool>()) {
      throw std::invalid_argument("bce_label_loss: label must be 0 or 1");
    }
  }
  return torch::binary_cross_entropy_with_logits(class_logit, c.to(class_logit.dtype()));
}

namespace {

const torch::Tensor& require(const std::optional<torch::Tensor>& t, const char* what, Version v) {
  if (!t || !t->defined()) {
    throw std::invalid_argument(std::string("missing output ") + what + " required by " + std::string(to_string(v)));
  }
  return *t;
}

const torch::Tensor& require(const torch::Tensor& t, const char* what, Version v) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string("missing output ") + what + " required by " + std::string(to_string(v)));
  }
  return t;
}

}  // namespace

LossBreakdown version_loss(Version version, const BranchOutputs& outputs, const LossTargets& targets,
                           const LossWeights& weights) {
  LossBreakdown b;
  const auto& out_a = require(outputs.out_a, "out_a", version);
  const auto& out_b = require(outputs.out_b, "out_b", version);

  switch (version) {
    case Version::v1:
    case Version::v2:
    case Version::v3: {
      const auto rec = mirror::mse_loss(out_a, targets.clean_a);
      const auto seg = dice_ce_loss(out_b, targets.y);
      b.total = weights.lambda_rec * rec + weights.lambda_seg * seg;
      b.rec_branch = rec.item<double>();
      b.has_rec_branch = true;
      b.seg = seg.item<double>();
      if (version != Version::v1) {
        const auto rec_btl = mirror::mse_loss(require(outputs.out_btl, "out_btl", version), targets.x_b);
        b.total = b.total + weights.lambda_rec * rec_btl;
        b.rec_btl = rec_btl.item<double>();
        b.has_rec_btl = true;
      }
      if (version == Version::v3) {
        const auto cls = bce_label_loss(require(outputs.class_logit, "class_logit", version), targets.label);
        b.total = b.total + weights.lambda_class * cls;
        b.class_term = cls.item<double>();
        b.has_class = true;
      }
      break;
    }
    case Version::v4: {
      const auto& theta = require(outputs.theta, "theta", version);
      const auto seg = dice_ce_loss(fuse_logits(out_a, out_b, theta), targets.y);
      b.total = seg;
      b.seg = seg.item<double>();
      break;
    }
    case Version::v2_brain: {
      const auto t = brain_targets(targets.y);
      const auto seg = dice_ce_loss(out_a, t.edema) + dice_ce_loss(out_b, t.core);
      const auto whole = dice_ce_loss(require(outputs.out_btl, "out_btl", version), t.whole);
      b.total = weights.lambda_seg * seg + weights.lambda_seg * whole;
      b.seg = seg.item<double>();
      b.rec_btl = whole.item<double>();
      b.has_rec_btl = true;
      break;
    }
    case Version::v2_rec_brain: {
      const auto t = brain_targets(targets.y);
      if (out_b.size(1) != 3) throw std::invalid_argument("v2-rec-brain expects a 3-channel branch-B output");
      const auto rec = mirror::mse_loss(out_a, targets.clean_a);
      const std::array<const torch::Tensor*, 3> classes{&t.edema, &t.core, &t.whole};
      torch::Tensor seg = torch::zeros({}, out_b.options());
      for (int64_t c = 0; c < 3; ++c) seg = seg + dice_ce_loss(out_b.narrow(1, c, 1), *classes[c]);
      seg = seg / 3.0;
      const auto rec_btl = mirror::mse_loss(require(outputs.out_btl, "out_btl", version), targets.x_b);
      b.total = weights.lambda_rec * rec + weights.lambda_seg * seg + weights.lambda_rec * rec_btl;
      b.rec_branch = rec.item<double>();
      b.has_rec_branch = true;
      b.seg = seg.item<double>();
      b.rec_btl = rec_btl.item<double>();
      b.has_rec_btl = true;
      break;
    }
  }
  return b;
}

}  // namespace mirror
