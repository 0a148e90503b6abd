#include <benchmark/benchmark.h>

#include <numbers>

#include "pilotwave/ensemble.hpp"

using namespace pilotwave;

namespace {

std::vector<MomentumAmplitude> modes(int count) {
  std::vector<MomentumAmplitude> out;
  CounterRng rng(99);
  for (int k = 0; k < count; ++k)
    out.push_back({{rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2},
                   std::polar(1.0, 6.0 * rng.uniform())});
  return out;
}

WeylWavefunction weyl(int count) {
  std::vector<Mode> m;
  for (const auto& a : modes(count)) m.push_back({a.p, a.alpha});
  return WeylWavefunction(m);
}

void BM_WeylEvaluate(benchmark::State& state) {
  const WeylWavefunction wf = weyl(static_cast<int>(state.range(0)));
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(wf(t, {0.3, 0.2, 0.1}));
    t += 1e-3;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeylEvaluate)->Arg(3)->Arg(30)->Arg(300);

void BM_ZigzagEvaluate(benchmark::State& state) {
  const ZigzagState zz(10.0, modes(static_cast<int>(state.range(0))));
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(zz.evaluate(t, {0.3, 0.2, 0.1}));
    t += 1e-3;
  }
}
BENCHMARK(BM_ZigzagEvaluate)->Arg(3)->Arg(30)->Arg(300);

void BM_WeylRk4(benchmark::State& state) {
  const VelocityField field = weyl_guidance(weyl(3));
  for (auto _ : state) benchmark::DoNotOptimize(advance_deterministic(field, {0, 0, 0}, 0.0, 10.0, 1e-3));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_WeylRk4)->Unit(benchmark::kMillisecond);

void BM_ZigzagJumpProcess(benchmark::State& state) {
  const ZigzagState zz(10.0, modes(3));
  const BranchFlow flow = zigzag_flow(zz);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    CounterRng rng(seed++);
    benchmark::DoNotOptimize(advance_jump_process(flow, {0, 1, 0}, Branch::zag, 0.0, 10.0, 1e-3, rng));
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_ZigzagJumpProcess)->Unit(benchmark::kMillisecond);

void BM_SampleDensity(benchmark::State& state) {
  const WeylWavefunction wf = weyl(3);
  const double L = 2 * std::numbers::pi;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_density([&](const Vec3& x) { return wf(0.0, x).norm2(); },
                                            {{0, 0, 0}, {L, L, L}}, 10000, seed++));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_SampleDensity)->Unit(benchmark::kMillisecond);

void BM_CoarseGrainedH(benchmark::State& state) {
  const WeylWavefunction wf = weyl(3);
  const DensityField rho = [&](const Vec3& x) { return wf(0.0, x).norm2(); };
  const Box box{{0, 0, 0}, {6, 6, 6}};
  const EnsembleFrame frame = sample_density(rho, box, 100000, 1);
  const Grid grid(box, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(coarse_grained_H(frame, rho, grid));
}
BENCHMARK(BM_CoarseGrainedH)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
