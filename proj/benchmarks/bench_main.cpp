// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "msgan/inversion.hpp"
#include "msgan/losses.hpp"
#include "msgan/metrics.hpp"
#include "msgan/ops.hpp"
#include "msgan/random.hpp"
#include "msgan/trainer.hpp"

namespace {

using namespace msgan;

std::vector<SCode> toy_codes(const BaseModel& base, int n) {
  std::vector<SCode> codes;
  for (int i = 0; i < n; ++i) codes.push_back(base.random_style(gaussian_vector(i, base.z_dim())));
  return codes;
}

const BaseModel& toy() {
  static const BaseModel base = BaseModel::create(BaseModelConfig::toy(), 1);
  return base;
}

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x({c, 4, 16, 16}, 0.5);
  std::vector<double> w(static_cast<std::size_t>(c) * c * 9, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, c, 3));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Arg(64);

void BM_GeneratorForward(benchmark::State& state) {
  const auto codes = toy_codes(toy(), static_cast<int>(state.range(0)));
  const RowBatch rb = RowBatch::pack<StyleSpace>(codes);
  for (auto _ : state) benchmark::DoNotOptimize(toy().generator.forward(rb, nullptr));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(4)->Arg(16);

void BM_GeneratorForwardBackward(benchmark::State& state) {
  const auto codes = toy_codes(toy(), static_cast<int>(state.range(0)));
  const RowBatch rb = RowBatch::pack<StyleSpace>(codes);
  GradList grads = zero_grads(toy().generator.params());
  for (auto _ : state) {
    Generator::Trace tr;
    const Tensor out = toy().generator.forward(rb, &tr);
    RowBatch gs;
    toy().generator.backward(tr, out, &grads, &gs);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorForwardBackward)->Arg(1)->Arg(4)->Arg(16);

void BM_TrainStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BaseModel& base = toy();
  std::vector<NamedImage> refs;
  const auto codes = toy_codes(base, n);
  for (int k = 0; k < n; ++k) refs.push_back(NamedImage{"s" + std::to_string(k), base.generator.synthesize(codes[k])});
  TrainConfig cfg;
  cfg.iterations = 1 << 30;
  TrainingState st = prepare_from_codes(refs, codes, cfg, base);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(st));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ContextualLoss(benchmark::State& state) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(32, 64), b = Eigen::MatrixXd::Random(32, 64);
  Eigen::MatrixXd g;
  for (auto _ : state) benchmark::DoNotOptimize(contextual_loss(a, b, 0.5, &g));
}
BENCHMARK(BM_ContextualLoss);

void BM_Sifid(benchmark::State& state) {
  const auto codes = toy_codes(toy(), 2);
  const Image a = toy().generator.synthesize(codes[0]), b = toy().generator.synthesize(codes[1]);
  const FeatureExtractor fx{&toy().discriminator, 0};
  for (auto _ : state) benchmark::DoNotOptimize(sifid(a, b, fx));
}
BENCHMARK(BM_Sifid);

void BM_StnApply(benchmark::State& state) {
  const RowSchedule sch = RowSchedule::full_scale();
  const STN t = STN::random(sch, 3);
  SCode s = SCode::zeros(sch);
  for (auto _ : state) benchmark::DoNotOptimize(t.apply(s));
}
BENCHMARK(BM_StnApply);

}  // namespace
BENCHMARK_MAIN();
