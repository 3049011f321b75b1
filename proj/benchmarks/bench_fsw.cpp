#include <random>

#include <benchmark/benchmark.h>

#include "fcil/datasets.hpp"
#include "fcil/fsw.hpp"
#include "fcil/replay.hpp"
#include "fcil/trainer.hpp"

namespace {

struct Fixture {
  fcil::TaskStream stream;
  fcil::MlpModel model;
  std::vector<fcil::Sample> buffer;
};

Fixture make_fixture(int n_per_class, int width) {
  Fixture f;
  f.stream = fcil::gen_toy_gaussians(n_per_class, 3);
  std::mt19937_64 rng(5);
  f.model = fcil::MlpModel::create(f.stream.num_features, {width, width}, f.stream.num_classes, rng);
  fcil::ReplayBuffer buf(32, fcil::GroupMode::by_class);
  buf.add_task(f.stream.tasks[0], rng);
  f.buffer = buf.merged();
  return f;
}

void BM_FswWeights(benchmark::State& state) {
  const auto f = make_fixture(static_cast<int>(state.range(0)), 64);
  const fcil::FswConfig cfg;
  const fcil::FswContext ctx{f.stream.all_classes, {}};
  for (auto _ : state) {
    auto r = fcil::fsw_weights(f.stream.tasks[1].samples, f.buffer, f.model, cfg, ctx);
    benchmark::DoNotOptimize(r.objective);
  }
}
BENCHMARK(BM_FswWeights)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FullGrad(benchmark::State& state) {
  const auto f = make_fixture(500, static_cast<int>(state.range(0)));
  const std::span<const fcil::Sample> batch(f.stream.tasks[0].samples.data(), 64);
  for (auto _ : state) {
    auto g = fcil::full_grad(f.model, batch);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_FullGrad)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_ToyRun(benchmark::State& state) {
  const auto stream = fcil::gen_toy_gaussians(500, 1);
  fcil::TrainConfig cfg;
  cfg.hidden = {32};
  cfg.epochs = 5;
  for (auto _ : state) {
    auto h = fcil::run_method(fcil::Method::fsw, stream, cfg, 1);
    benchmark::DoNotOptimize(h.tasks.size());
  }
}
BENCHMARK(BM_ToyRun)->Unit(benchmark::kMillisecond);

}  // namespace
