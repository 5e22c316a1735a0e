#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "mirror/inference.hpp"
#include "mirror/metrics.hpp"
#include "mirror/model.hpp"
#include "mirror/phantom.hpp"

namespace {

mirror::ModelConfig small_config(mirror::Version v) {
  mirror::ModelConfig cfg;
  cfg.version = v;
  cfg.widths = {8, 16, 32, 64, 128};
  cfg.in_patch = {32, 32, 32};
  if (v == mirror::Version::v4) cfg.theta = mirror::Theta{0.3, false};
  return cfg;
}

void BM_ForwardV3(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  auto model = mirror::build_model(small_config(mirror::Version::v3));
  model->eval();
  const auto n = state.range(0);
  const auto x = torch::rand({1, 1, n, n, n});
  for (auto _ : state) benchmark::DoNotOptimize(model->forward(x, x).out_b);
}
BENCHMARK(BM_ForwardV3)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_TrainStepV3(benchmark::State& state) {
  auto model = mirror::build_model(small_config(mirror::Version::v3));
  torch::optim::Adam opt(model->parameters(), 1e-3);
  const auto x = torch::rand({2, 1, 32, 32, 32});
  const auto y = (torch::rand({2, 1, 32, 32, 32}) > 0.9).to(torch::kFloat);
  for (auto _ : state) {
    opt.zero_grad();
    auto out = model->forward(x, x);
    auto loss = torch::binary_cross_entropy_with_logits(out.out_b, y) + torch::mse_loss(out.out_a, x);
    loss.backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainStepV3)->Unit(benchmark::kMillisecond);

void BM_ConnectedComponents(benchmark::State& state) {
  mirror::PhantomSpec spec;
  spec.lesion_count = 4;
  const auto sample = mirror::generate_phantom(spec);
  for (auto _ : state) benchmark::DoNotOptimize(mirror::connected_components(sample.y, 26).count());
}
BENCHMARK(BM_ConnectedComponents)->Unit(benchmark::kMillisecond);

void BM_ComputeMetrics(benchmark::State& state) {
  mirror::PhantomSpec spec;
  spec.lesion_count = 4;
  const auto gt = mirror::generate_phantom(spec).y;
  spec.seed = 7;
  const auto pred = mirror::generate_phantom(spec).y;
  for (auto _ : state) benchmark::DoNotOptimize(mirror::compute_metrics(pred, gt).dice);
}
BENCHMARK(BM_ComputeMetrics)->Unit(benchmark::kMillisecond);

void BM_SlidingWindow(benchmark::State& state) {
  const mirror::Volume vol({64, 64, 64});
  mirror::WindowSpec spec{{32, 32, 32}, 0.5};
  const mirror::PatchPredictor identity = [](const torch::Tensor& a, const torch::Tensor&) { return a.clone(); };
  for (auto _ : state) benchmark::DoNotOptimize(mirror::sliding_window_predict(identity, vol, vol, spec));
}
BENCHMARK(BM_SlidingWindow)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
