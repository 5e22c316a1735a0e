#include <fstream>
#include <iterator>

#include "doctest.h"
#include "mirror/phantom.hpp"
#include "mirror/training.hpp"
#include "test_util.hpp"

using namespace mirror;
using mirror::testing::TempDir;

namespace {

std::vector<MultimodalSample> tiny_set(int count, uint64_t seed = 0) {
  std::vector<MultimodalSample> out;
  PhantomSpec base;
  base.shape = {24, 24, 24};
  base.lesion_radius_mm = {4.0, 6.0};
  base.organ_radius_mm = {5.0, 7.0};
  base.organ_count = 1;
  for (const auto& spec : phantom_cohort(base, count, 0.75, 2, seed)) out.push_back(generate_phantom(spec));
  return out;
}

TrainConfig tiny_config(Version v = Version::v3) {
  TrainConfig cfg;
  cfg.model.version = v;
  cfg.model.widths = {2, 4, 4, 8, 8};
  cfg.model.in_patch = {16, 16, 16};
  cfg.batch_size = 2;
  cfg.epochs = 1;
  cfg.val_every = 0;
  return cfg;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("batches stack patches and corrupt only branch A") {
  const auto data = tiny_set(3);
  auto cfg = tiny_config();
  cfg.corruption.kind = Corruption::noise;
  Philox s(1), c(2);
  const auto b = make_batch(cfg, data, {0, 1, 2}, s, c);
  CHECK((b.x_a.sizes() == torch::IntArrayRef{3, 1, 16, 16, 16}));
  CHECK(b.label.sizes() == torch::IntArrayRef{3});
  CHECK_FALSE(torch::equal(b.x_a, b.clean_a));
  CHECK(torch::logical_or(b.y.eq(0), b.y.eq(1)).all().item<bool>());

  cfg.corruption.kind = Corruption::none;
  Philox s2(1), c2(2);
  const auto plain = make_batch(cfg, data, {0, 1, 2}, s2, c2);
  CHECK(torch::equal(plain.x_a, plain.clean_a));
  CHECK(torch::equal(plain.clean_a, b.clean_a));
}

TEST_CASE("weight decay applies to convolution weights only") {
  const auto net = build_network(tiny_config(Version::v3));
  const auto split = weight_decay_split(*net);
  CHECK_FALSE(split.decay.empty());
  CHECK_FALSE(split.no_decay.empty());
  const auto params = net->named_parameters();
  for (const auto& name : split.decay) CHECK(params[name].dim() == 5);
  for (const auto& name : split.no_decay) CHECK(params[name].dim() != 5);
}

TEST_CASE("step count follows ceil(N / batch) per epoch; max_steps stops early") {
  const auto data = tiny_set(5);
  auto cfg = tiny_config(Version::v1);
  cfg.epochs = 2;
  const auto r = train_model(cfg, data, {});
  CHECK(r.history.steps.size() == 6);
  CHECK(r.history.epochs.size() == 2);
  CHECK(r.history.steps.back().epoch == 1);
  cfg.max_steps = 4;
  CHECK(train_model(cfg, data, {}).history.steps.size() == 4);
}

TEST_CASE("zero segmentation weight leaves the segmentation head without gradient") {
  const auto data = tiny_set(4);
  auto cfg = tiny_config(Version::v1);
  cfg.weights.lambda_seg = 0.0;
  cfg.epochs = 2;
  int checked = 0;
  TrainHooks hooks;
  hooks.after_backward = [&](int64_t, NetworkImpl& net) {
    for (const auto& p : net.named_parameters()) {
      const auto& key = p.key();
      if (key.rfind("branchB.head", 0) != 0 && key.rfind("branchB.out", 0) != 0) continue;
      const auto& g = p.value().grad();
      CHECK((!g.defined() || g.abs().max().item<double>() == 0.0));
      ++checked;
    }
  };
  train_model(cfg, data, {}, hooks);
  CHECK(checked > 0);
}

TEST_CASE("equal seeds give bitwise-equal checkpoints; checkpoints round trip") {
  TempDir tmp("ckpt");
  const auto data = tiny_set(4);
  auto cfg = tiny_config(Version::v3);
  cfg.corruption.kind = Corruption::shuffle;
  cfg.corruption.shuffle_edge = 8;
  const auto a = train_model(cfg, data, {});
  const auto b = train_model(cfg, data, {});
  save_checkpoint(a.checkpoint, tmp.path() / "a.ckpt");
  save_checkpoint(b.checkpoint, tmp.path() / "b.ckpt");
  CHECK(file_bytes(tmp.path() / "a.ckpt") == file_bytes(tmp.path() / "b.ckpt"));

  auto other = cfg;
  other.seed = 1;
  save_checkpoint(train_model(other, data, {}).checkpoint, tmp.path() / "c.ckpt");
  CHECK(file_bytes(tmp.path() / "a.ckpt") != file_bytes(tmp.path() / "c.ckpt"));

  const auto loaded = load_checkpoint(tmp.path() / "a.ckpt");
  CHECK(to_config_text(loaded.config) == to_config_text(cfg));
  CHECK(loaded.spacing == data[0].x_a.spacing());
  auto* mirror = dynamic_cast<MirrorUNetImpl*>(loaded.network.get());
  REQUIRE(mirror);
  CHECK(mirror->verify_tying());
  const auto pa = predict_mask(a.checkpoint.network, cfg, data[0]);
  const auto pb = predict_mask(loaded.network, cfg, data[0]);
  CHECK(std::equal(pa.values().begin(), pa.values().end(), pb.values().begin()));

  {
    std::ofstream os(tmp.path() / "bad.ckpt", std::ios::binary);
    os << "NOTACHECKPOINT";
  }
  CHECK_THROWS(load_checkpoint(tmp.path() / "bad.ckpt"));
}

TEST_CASE("validation keeps per-epoch records") {
  const auto data = tiny_set(4);
  auto cfg = tiny_config(Version::v2);
  cfg.epochs = 2;
  cfg.val_every = 1;
  const auto r = train_model(cfg, data, tiny_set(2, 9));
  REQUIRE(r.history.epochs.size() == 2);
  CHECK(r.history.epochs[0].val.has_value());
  CHECK(r.history.epochs[1].val.has_value());
}

TEST_CASE("non-finite losses abort training") {
  auto data = tiny_set(2);
  auto cfg = tiny_config(Version::v1);
  for (auto& s : data) {
    for (int64_t n = 0; n < s.x_a.size(); ++n) s.x_a[n] = std::numeric_limits<float>::quiet_NaN();
  }
  CHECK_THROWS_WITH_AS(train_model(cfg, data, {}), doctest::Contains("non-finite loss"), std::runtime_error);
}

TEST_CASE("evaluation: oracle predictor is perfect; empty sets and spacing mismatches fail") {
  const auto data = tiny_set(3);
  const auto cfg = tiny_config(Version::v1);
  const auto eval = evaluate_masks([](const MultimodalSample& s) { return s.y; },
                                   [&](const MultimodalSample& s) { return evaluation_target(cfg, s); }, data);
  CHECK(eval.cases.size() == 3);
  CHECK(eval.mean.dice == 1.0);
  CHECK(eval.mean.fpv_ml == 0.0);
  CHECK(eval.mean.fnv_ml == 0.0);
  CHECK_THROWS(evaluate_masks([](const MultimodalSample& s) { return s.y; },
                              [](const MultimodalSample& s) { return s.y; }, {}));

  Checkpoint ck{cfg, {1.0, 1.0, 1.0}, build_network(cfg)};
  CHECK_THROWS_AS(evaluate_model(ck, data), ConfigError);
}

TEST_CASE("predictors select the configured outputs") {
  const auto x = torch::rand({1, 1, 16, 16, 16});
  auto v4 = tiny_config(Version::v4);
  v4.model.theta = Theta{0.0, false};
  const auto net = build_network(v4);
  const auto out = net->forward(x, x);
  CHECK(torch::equal(make_predictor(net, v4)(x, x), out.out_b));

  auto brain = tiny_config(Version::v2_brain);
  CHECK(make_predictor(build_network(brain), brain)(x, x).size(1) == 2);
  auto lf = tiny_config(Version::v1);
  lf.baseline = BaselineKind::late_fusion_base;
  lf.late_fusion = LateFusion::union_;
  CHECK(make_predictor(build_network(lf), lf)(x, x).size(1) == 2);
  lf.late_fusion = LateFusion::logit_sum;
  CHECK(make_predictor(build_network(lf), lf)(x, x).size(1) == 1);
}
