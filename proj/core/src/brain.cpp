#include "mirror/brain.hpp"

#include <stdexcept>

namespace mirror {

BrainTargets brain_targets(const torch::Tensor& labels) {
  {
    torch::NoGradGuard no_grad;
    if (labels.ne(0).logical_and(labels.ne(1)).logical_and(labels.ne(2)).any().item<bool>()) {
      throw std::invalid_argument("brain label map must contain only 0, 1 and 2");
    }
  }
  const auto opts = labels.options().dtype(torch::kFloat32);
  return {labels.eq(1).to(opts), labels.eq(2).to(opts), labels.ge(1).to(opts)};
}

BrainMasks brain_targets(const Volume& labels) {
  BrainMasks m{Volume(labels.shape(), labels.spacing(), labels.origin()),
               Volume(labels.shape(), labels.spacing(), labels.origin()),
               Volume(labels.shape(), labels.spacing(), labels.origin())};
  const auto src = labels.values();
  auto edema = m.edema.values();
  auto core = m.core.values();
  auto whole = m.whole.values();
  for (size_t n = 0; n < src.size(); ++n) {
    const float v = src[n];
    if (v != 0.0f && v != 1.0f && v != 2.0f) {
      throw std::invalid_argument("brain label map must contain only 0, 1 and 2");
    }
    edema[n] = v == 1.0f ? 1.0f : 0.0f;
    core[n] = v == 2.0f ? 1.0f : 0.0f;
    whole[n] = v >= 1.0f ? 1.0f : 0.0f;
  }
  return m;
}

torch::Tensor brain_final_mask(const BranchOutputs& outputs, double tau) {
  if (!outputs.out_a.defined() || !outputs.out_b.defined()) {
    throw std::invalid_argument("brain_final_mask: missing branch output");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (outputs.out_a.sizes() != outputs.out_b.sizes()) throw std::invalid_argument("brain_final_mask: shape mismatch");
  torch::NoGradGuard no_grad;
  const auto edema = torch::sigmoid(outputs.out_a).ge(tau);
  const auto core = torch::sigmoid(outputs.out_b).ge(tau);
  return edema.logical_or(core).to(torch::kFloat32);
}

}  // namespace mirror
