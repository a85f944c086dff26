// Kernel timings behind the per-frame latency: RD transform, CFAR, one
// encoder conv, and full inference with the desk and full-width models.

#include <benchmark/benchmark.h>

#include <random>

#include "drd/classic.hpp"
#include "drd/drd_net.hpp"
#include "drd/nn/kernels.hpp"
#include "drd/signal_sim.hpp"

using namespace drd;

namespace {

RawFrame bench_frame() {
  const auto p = RadarParams::desk_default();
  const AngleGrid g;
  const auto pert = sim::ChannelPerturbation::random(0, p.n_antennas, 1);
  return sim::synthesize_frame({{range_of_bin(10, p), 0.0, 12.0, -4.0, 1.0}}, p, g, &pert, 30.0, 2).frame;
}

void BM_RdTransform(benchmark::State& state) {
  const auto f = bench_frame();
  for (auto _ : state) benchmark::DoNotOptimize(classic::rd_transform(f));
}
BENCHMARK(BM_RdTransform)->Unit(benchmark::kMicrosecond);

void BM_CaCfar(benchmark::State& state) {
  const auto e = classic::rd_transform(bench_frame()).energy_map();
  const auto cp = state.range(0) == 1 ? classic::CfarParams::classic1() : classic::CfarParams::classic2();
  const double floor_db = 10.0 * std::log10(classic::estimate_noise_floor(e, 64, 64));
  for (auto _ : state) benchmark::DoNotOptimize(classic::ca_cfar({e, 64, 64}, cp, floor_db));
}
BENCHMARK(BM_CaCfar)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_ClassicDetect(benchmark::State& state) {
  const auto f = bench_frame();
  const AngleGrid g;
  const auto cal = classic::CalibrationMatrix::measure(g, f.params().geometry, nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(classic::classic_detect(f, classic::CfarParams::classic2(), cal, g));
}
BENCHMARK(BM_ClassicDetect)->Unit(benchmark::kMicrosecond);

// 3x3 conv, pad 1, on a 64x64 map with Cin -> Cout channels.
void BM_Conv3x3(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0)), cout = static_cast<int>(state.range(1));
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n;
  nn::TensorF x({1, cin, 64, 64}), w({cout, cin, 3, 3}), b({cout});
  for (auto& v : x.values()) v = n(rng);
  for (auto& v : w.values()) v = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, w, b, {1, 1}));
}
BENCHMARK(BM_Conv3x3)->Args({16, 8})->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);

void BM_Infer(benchmark::State& state) {
  model::RDNetConfig rd;
  if (state.range(0) == 0) rd.widths = {8, 16, 32, 64};
  const auto m = model::DrdModel<float>::create(rd, model::AngNetConfig{}, 4);
  const auto f = bench_frame();
  for (auto _ : state) benchmark::DoNotOptimize(model::infer(m, f));
}
BENCHMARK(BM_Infer)->Arg(0)->Arg(1)->ArgNames({"full_width"})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
