#include "mirror/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mirror/model.hpp"
#include "mirror/sampling.hpp"

namespace mirror {

void WindowSpec::validate() const {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("window overlap must lie in [0, 1)");
  for (auto p : patch) {
    if (p < 1) throw ConfigError("window patch dimensions must be positive");
  }
}

std::vector<int64_t> tile_starts(int64_t extent, int64_t patch, double overlap) {
  if (extent <= patch) return {0};
  const auto stride = std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<double>(patch) * (1.0 - overlap))));
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + patch < extent; s += stride) starts.push_back(s);
  starts.push_back(extent - patch);
  return starts;
}

std::vector<Volume> sliding_window_predict(const PatchPredictor& predictor, const Volume& x_a, const Volume& x_b,
                                           const WindowSpec& spec) {
  spec.validate();
  if (x_a.shape() != x_b.shape()) throw std::invalid_argument("modalities must share a grid");
  const Shape3 shape = x_a.shape();
  Shape3 padded{};
  for (int a = 0; a < 3; ++a) padded[a] = std::max(shape[a], spec.patch[a]);
  const PatchRegion full{{0, 0, 0}, padded};
  const Volume a_pad = padded == shape ? x_a : crop(x_a, full, PadMode::edge);
  const Volume b_pad = padded == shape ? x_b : crop(x_b, full, PadMode::edge);
  const auto ta = to_tensor(a_pad);
  const auto tb = to_tensor(b_pad);

  std::array<std::vector<int64_t>, 3> starts;
  for (int a = 0; a < 3; ++a) starts[a] = tile_starts(padded[a], spec.patch[a], spec.overlap);

  // Tensor layout is [N, C, D, H, W], so axis a of Shape3 is tensor dim 4 - a.
  torch::Tensor sum;
  auto count = torch::zeros({padded[2], padded[1], padded[0]});
  torch::NoGradGuard no_grad;
  for (auto k0 : starts[2]) {
    for (auto j0 : starts[1]) {
      for (auto i0 : starts[0]) {
        auto slice = [&](const torch::Tensor& t) {
          return t.narrow(2, k0, spec.patch[2]).narrow(3, j0, spec.patch[1]).narrow(4, i0, spec.patch[0]);
        };
        const auto logits = predictor(slice(ta).contiguous(), slice(tb).contiguous());
        if (logits.dim() != 5 || logits.size(0) != 1 || logits.size(2) != spec.patch[2] ||
            logits.size(3) != spec.patch[1] || logits.size(4) != spec.patch[0]) {
          throw std::runtime_error("predictor returned an unexpected shape");
        }
        const auto probs = torch::sigmoid(logits.to(torch::kFloat32))[0];
        if (!sum.defined()) sum = torch::zeros({probs.size(0), padded[2], padded[1], padded[0]});
        sum.narrow(1, k0, spec.patch[2]).narrow(2, j0, spec.patch[1]).narrow(3, i0, spec.patch[0]).add_(probs);
        count.narrow(0, k0, spec.patch[2]).narrow(1, j0, spec.patch[1]).narrow(2, i0, spec.patch[0]).add_(1.0);
      }
    }
  }
  const auto mean = sum / count.unsqueeze(0);
  std::vector<Volume> out;
  for (int64_t c = 0; c < mean.size(0); ++c) {
    const auto cropped = mean[c].narrow(0, 0, shape[2]).narrow(1, 0, shape[1]).narrow(2, 0, shape[0]);
    out.push_back(to_volume(cropped.contiguous(), x_a.spacing(), x_a.origin()));
  }
  return out;
}

Volume binarize(const Volume& probs, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  Volume out(probs.shape(), probs.spacing(), probs.origin());
  const auto in = probs.values();
  auto o = out.values();
  for (size_t n = 0; n < o.size(); ++n) o[n] = static_cast<double>(in[n]) >= tau ? 1.0f : 0.0f;
  return out;
}

std::string_view to_string(LateFusion mode) {
  switch (mode) {
    case LateFusion::logit_sum: return "logit_sum";
    case LateFusion::union_: return "union";
    case LateFusion::intersection: return "intersection";
  }
  return "logit_sum";
}

LateFusion parse_late_fusion(std::string_view text) {
  if (text == "logit_sum" || text == "logits") return LateFusion::logit_sum;
  if (text == "union") return LateFusion::union_;
  if (text == "intersection") return LateFusion::intersection;
  throw ConfigError("unknown late-fusion mode '" + std::string(text) + "' (expected logit_sum|union|intersection)");
}

Volume late_fuse(const Prediction& a, const Prediction& b, LateFusion mode) {
  if (a.volume.shape() != b.volume.shape()) throw std::invalid_argument("late_fuse: shape mismatch");
  const auto want = mode == LateFusion::logit_sum ? Prediction::Kind::logits : Prediction::Kind::mask;
  if (a.kind != want || b.kind != want) {
    throw std::invalid_argument(std::string("late_fuse: mode ") + std::string(to_string(mode)) +
                                (want == Prediction::Kind::logits ? " expects logits" : " expects binary masks"));
  }
  if (want == Prediction::Kind::mask && (!is_binary(a.volume) || !is_binary(b.volume))) {
    throw std::invalid_argument("late_fuse: masks must be binary");
  }
  Volume out(a.volume.shape(), a.volume.spacing(), a.volume.origin());
  const auto av = a.volume.values();
  const auto bv = b.volume.values();
  auto o = out.values();
  for (size_t n = 0; n < o.size(); ++n) {
    bool fg = false;
    switch (mode) {
      case LateFusion::logit_sum: {
        const double s = static_cast<double>(av[n]) + static_cast<double>(bv[n]);
        fg = 1.0 / (1.0 + std::exp(-s)) >= 0.5;
        break;
      }
      case LateFusion::union_: fg = av[n] != 0.0f || bv[n] != 0.0f; break;
      case LateFusion::intersection: fg = av[n] != 0.0f && bv[n] != 0.0f; break;
    }
    o[n] = fg ? 1.0f : 0.0f;
  }
  return out;
}

Volume combine_brain_masks(const Volume& core_mask, const Volume& edema_mask) {
  if (core_mask.shape() != edema_mask.shape()) throw std::invalid_argument("brain masks: shape mismatch");
  return late_fuse(Prediction::mask(core_mask), Prediction::mask(edema_mask), LateFusion::union_);
}

}  // namespace mirror
