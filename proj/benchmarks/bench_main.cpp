#include <benchmark/benchmark.h>

#include <mfpe/fpe.hpp>
#include <mfpe/levy.hpp>
#include <mfpe/sde.hpp>
#include <mfpe/transform.hpp>

using namespace mfpe;

namespace {

SdeModel example1() {
  return SdeModel(AffineMap{-1.0, 0.0}, TransformAtlas(SigmaFunction::linear(1.0)),
                  LevyTriplet(1.0, 0.0, LevyMeasure::alpha_stable(1.5)));
}

void BM_HTilde(benchmark::State& state) {
  const bool numeric = state.range(0) != 0;
  auto sigma = SigmaFunction::sine(1.0, Interval{-3.0, 3.0});
  if (numeric) sigma = sigma.without_closed_form();
  const TransformAtlas atlas(sigma);
  double x = 0.5, acc = 0.0;
  for (auto _ : state) {
    acc += h_tilde(atlas, x, 0.3);
    x = x < 2.5 ? x + 1e-3 : 0.5;
  }
  benchmark::DoNotOptimize(acc);
  state.SetLabel(numeric ? "numeric sine" : "closed-form sine");
}
BENCHMARK(BM_HTilde)->Arg(0)->Arg(1);

void BM_SampleJumps(benchmark::State& state) {
  const auto nu = LevyMeasure::alpha_stable(1.5);
  const double eps = 1.0 / static_cast<double>(state.range(0));
  RngState rng(3);
  std::vector<JumpEvent> buf;
  std::int64_t jumps = 0;
  for (auto _ : state) {
    sample_jumps_into(nu, 0.5, eps, rng, buf);
    jumps += static_cast<std::int64_t>(buf.size());
  }
  state.SetItemsProcessed(jumps);
}
BENCHMARK(BM_SampleJumps)->Arg(100)->Arg(1000);

void BM_FpeStep(benchmark::State& state) {
  const GridSpec grid{-10.0, 10.0, static_cast<int>(state.range(0))};
  const auto op = assemble_operator(example1(), grid, QuadratureParams{1e-3, 0.0, 64});
  auto p = DensityGrid::from_density(grid, Density1D::normal(1.0, 0.3));
  const double dt = 0.5 * stability_limit(op);
  for (auto _ : state) {
    p = step(op, p, dt);
    benchmark::DoNotOptimize(p.values.data());
  }
  state.SetItemsProcessed(state.iterations() * grid.n);
}
BENCHMARK(BM_FpeStep)->Arg(400)->Arg(800)->Arg(1600);

void BM_Simulate(benchmark::State& state) {
  const auto model = example1();
  SimulationPlan plan;
  plan.x0 = 1.0;
  plan.horizon = 0.5;
  plan.epsilon = 1e-3;
  plan.n_paths = state.range(0);
  plan.save_times = {0.5};
  for (auto _ : state) {
    auto ens = simulate(model, plan);
    benchmark::DoNotOptimize(ens.states.data());
    ++plan.seed;
  }
  state.SetItemsProcessed(state.iterations() * plan.n_paths);
}
BENCHMARK(BM_Simulate)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
