#include "mirror/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "mirror/brain.hpp"
#include "mirror/sampling.hpp"

namespace mirror {

void RunHistory::write_steps_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,epoch,total,seg,rec_branch,rec_btl,class_term\n" << std::setprecision(10);
  for (const auto& r : steps) {
    os << r.step << ',' << r.epoch << ',' << r.total << ',' << r.seg << ',' << r.rec_branch << ',' << r.rec_btl << ','
       << r.class_term << '\n';
  }
}

void RunHistory::write_epochs_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,val_dice,val_fpv_ml,val_fnv_ml,seconds\n" << std::setprecision(10);
  for (const auto& e : epochs) {
    os << e.epoch << ',';
    if (e.val) {
      os << e.val->dice << ',' << e.val->fpv_ml << ',' << e.val->fnv_ml;
    } else {
      os << ",,";
    }
    os << ',' << e.seconds << '\n';
  }
}

Batch make_batch(const TrainConfig& cfg, const std::vector<MultimodalSample>& data, const std::vector<size_t>& indices,
                 Philox& sampling_rng, Philox& corruption_rng) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  std::vector<torch::Tensor> xa, clean, xb, y;
  std::vector<float> labels;
  for (size_t idx : indices) {
    const auto patch = sample_patch(data.at(idx), cfg.model.in_patch, cfg.p_fg, sampling_rng);
    const auto corruption_seed = corruption_rng.next_u64();
    const auto& s = patch.sample;
    clean.push_back(to_tensor(s.x_a));
    xa.push_back(cfg.corruption.kind == Corruption::none ? clean.back()
                                                         : to_tensor(corrupt(s.x_a, cfg.corruption, corruption_seed)));
    xb.push_back(to_tensor(s.x_b));
    y.push_back(to_tensor(s.y));
    labels.push_back(static_cast<float>(s.label));
  }
  return {torch::cat(xa, 0), torch::cat(clean, 0), torch::cat(xb, 0), torch::cat(y, 0),
          torch::tensor(labels, torch::kFloat32)};
}

DecaySplit weight_decay_split(const NetworkImpl& network) {
  DecaySplit split;
  for (const auto& [name, p] : unique_named_parameters(network)) {
    (p.dim() == 5 ? split.decay : split.no_decay).push_back(name);
  }
  return split;
}

LossBreakdown compute_loss(const TrainConfig& cfg, const BranchOutputs& outputs, const Batch& batch) {
  if (cfg.baseline) return baseline_loss(*cfg.baseline, outputs, batch.y);
  return version_loss(cfg.model.version, outputs, {batch.clean_a, batch.x_b, batch.y, batch.label}, cfg.weights);
}

namespace {

void check_dataset(const std::vector<MultimodalSample>& data, const char* what) {
  if (data.empty()) throw std::invalid_argument(std::string(what) + " set is empty");
  const auto& spacing = data.front().x_a.spacing();
  for (const auto& s : data) {
    if (s.x_a.spacing() != spacing) throw ConfigError(std::string(what) + " set mixes voxel spacings");
  }
}

}  // namespace

TrainResult train_model(const TrainConfig& cfg, const std::vector<MultimodalSample>& train_set,
                        const std::vector<MultimodalSample>& val_set, const TrainHooks& hooks) {
  cfg.validate();
  check_dataset(train_set, "training");
  TrainResult result;
  result.checkpoint.config = cfg;
  result.checkpoint.spacing = train_set.front().x_a.spacing();
  auto network = build_network(cfg);
  result.checkpoint.network = network;
  network->train();

  std::vector<torch::Tensor> decay, no_decay;
  for (const auto& [name, p] : unique_named_parameters(*network)) (p.dim() == 5 ? decay : no_decay).push_back(p);
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(decay, std::make_unique<torch::optim::AdamOptions>(
                                 torch::optim::AdamOptions(cfg.lr).weight_decay(cfg.weight_decay)));
  groups.emplace_back(no_decay,
                      std::make_unique<torch::optim::AdamOptions>(torch::optim::AdamOptions(cfg.lr).weight_decay(0.0)));
  torch::optim::Adam optimizer(std::move(groups), torch::optim::AdamOptions(cfg.lr));

  const Philox root(cfg.seed);
  Philox sampling_rng = root.fork(1);
  Philox corruption_rng = root.fork(2);
  Philox order_rng = root.fork(3);
  const auto n = train_set.size();
  const auto batch = static_cast<size_t>(cfg.batch_size);
  const auto steps_per_epoch = static_cast<int64_t>((n + batch - 1) / batch);
  const bool validate = cfg.val_every > 0 && !val_set.empty();
  auto* mirror_net = dynamic_cast<MirrorUNetImpl*>(network.get());

  double best_dice = -1.0;
  std::vector<torch::Tensor> best_params;
  int64_t step = 0;
  bool done = false;
  for (int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<size_t> idx(batch);
      for (size_t b = 0; b < batch; ++b) idx[b] = order[(static_cast<size_t>(s) * batch + b) % n];
      const auto data = make_batch(cfg, train_set, idx, sampling_rng, corruption_rng);
      optimizer.zero_grad();
      const auto outputs = network->forward(data.x_a, data.x_b);
      const auto loss = compute_loss(cfg, outputs, data);
      const double total = loss.total_value();
      if (!std::isfinite(total)) {
        std::cerr << "non-finite loss at step " << step << " (epoch " << epoch << "): " << loss.describe() << '\n';
        throw std::runtime_error("non-finite loss at step " + std::to_string(step) + ": " + loss.describe());
      }
      loss.total.backward();
      if (hooks.after_backward) hooks.after_backward(step, *network);
      optimizer.step();
      result.history.steps.push_back({step, epoch, total, loss.seg, loss.rec_branch, loss.rec_btl, loss.class_term});
      ++step;
      if (mirror_net && cfg.tying_check_every > 0 && step % cfg.tying_check_every == 0 && !mirror_net->verify_tying()) {
        throw std::runtime_error("tied stages diverged at step " + std::to_string(step));
      }
      if (hooks.after_step) hooks.after_step(step, *network);
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    const bool last = done || epoch + 1 == cfg.epochs;
    if (validate && ((epoch + 1) % cfg.val_every == 0 || last)) {
      network->eval();
      const auto eval = evaluate_model(result.checkpoint, val_set);
      network->train();
      record.val = eval.mean;
      if (eval.mean.dice > best_dice) {
        best_dice = eval.mean.dice;
        torch::NoGradGuard no_grad;
        best_params.clear();
        for (const auto& p : network->parameters()) best_params.push_back(p.detach().clone());
      }
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(record);
  }
  if (!best_params.empty()) {
    torch::NoGradGuard no_grad;
    auto params = network->parameters();
    for (size_t i = 0; i < params.size(); ++i) params[i].copy_(best_params[i]);
  }
  network->eval();
  return result;
}

PatchPredictor make_predictor(const Network& network, const TrainConfig& cfg) {
  return [network, cfg](const torch::Tensor& a, const torch::Tensor& b) -> torch::Tensor {
    torch::NoGradGuard no_grad;
    const auto out = network->forward(a, b);
    if (cfg.baseline) {
      if (*cfg.baseline != BaselineKind::late_fusion_base) return out.out_b;
      if (cfg.late_fusion == LateFusion::logit_sum) return out.out_a + out.out_b;
      return torch::cat({out.out_a, out.out_b}, 1);
    }
    switch (cfg.model.version) {
      case Version::v4: return fuse_logits(out.out_a, out.out_b, *out.theta);
      case Version::v2_brain: return torch::cat({out.out_a, out.out_b}, 1);
      default: return out.out_b;
    }
  };
}

Volume final_mask(const TrainConfig& cfg, const std::vector<Volume>& probs) {
  if (probs.empty()) throw std::invalid_argument("no probability channels");
  if (cfg.baseline && *cfg.baseline == BaselineKind::late_fusion_base && cfg.late_fusion != LateFusion::logit_sum) {
    return late_fuse(Prediction::mask(binarize(probs.at(0), cfg.tau)), Prediction::mask(binarize(probs.at(1), cfg.tau)),
                     cfg.late_fusion);
  }
  if (!cfg.baseline && cfg.model.version == Version::v2_brain) {
    return combine_brain_masks(binarize(probs.at(1), cfg.tau), binarize(probs.at(0), cfg.tau));
  }
  if (!cfg.baseline && cfg.model.version == Version::v2_rec_brain) {
    // Channels are (edema, core, whole); the final mask unites edema and core.
    return combine_brain_masks(binarize(probs.at(1), cfg.tau), binarize(probs.at(0), cfg.tau));
  }
  return binarize(probs.front(), cfg.tau);
}

Volume evaluation_target(const TrainConfig& cfg, const MultimodalSample& sample) {
  if (!cfg.baseline && is_brain(cfg.model.version)) return brain_targets(sample.y).whole;
  return sample.y;
}

Volume predict_mask(const Network& network, const TrainConfig& cfg, const MultimodalSample& sample) {
  const auto probs = sliding_window_predict(make_predictor(network, cfg), sample.x_a, sample.x_b, cfg.window());
  return final_mask(cfg, probs);
}

Evaluation evaluate_masks(const std::function<Volume(const MultimodalSample&)>& predict,
                          const std::function<Volume(const MultimodalSample&)>& target,
                          const std::vector<MultimodalSample>& dataset, int connectivity) {
  if (dataset.empty()) throw std::invalid_argument("cannot evaluate an empty dataset");
  Evaluation e;
  for (const auto& s : dataset) e.cases.push_back(compute_metrics(predict(s), target(s), s.case_id, connectivity));
  e.mean = mean_metrics(e.cases);
  return e;
}

Evaluation evaluate_model(const Checkpoint& checkpoint, const std::vector<MultimodalSample>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("cannot evaluate an empty dataset");
  for (const auto& s : dataset) {
    if (s.x_a.spacing() != checkpoint.spacing) {
      throw ConfigError("spacing mismatch: case " + s.case_id + " differs from the checkpoint's training spacing");
    }
  }
  const auto& cfg = checkpoint.config;
  return evaluate_masks([&](const MultimodalSample& s) { return predict_mask(checkpoint.network, cfg, s); },
                        [&](const MultimodalSample& s) { return evaluation_target(cfg, s); }, dataset,
                        cfg.connectivity);
}

}  // namespace mirror
