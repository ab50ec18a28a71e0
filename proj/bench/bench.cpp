// Serial reference against the OpenMP path for the parallel kernels. The
// argument selects the execution policy: 0 serial, 1 parallel.

#include <vector>

#include <benchmark/benchmark.h>

#include "delaykern/circulant.hpp"
#include "delaykern/dde_oracle.hpp"
#include "delaykern/scalar_core.hpp"
#include "delaykern/spatial_synthesis.hpp"

using namespace delaykern;

namespace {

Execution policy(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_RegionBoundaries(benchmark::State& state) {
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) grid.push_back(-6.0 + 6.9 * i / 199.0);
  for (auto _ : state) benchmark::DoNotOptimize(region_boundaries(grid, 1.0, policy(state)));
  label(state);
}

void BM_SymbolSweep(benchmark::State& state) {
  const ReactionDiffusionParams p{1.0, 1.0, 1.0, 1.0};
  const auto sym = p.symbol_function(20.0, 801);
  for (auto _ : state) benchmark::DoNotOptimize(sweep_optimal_symbol(sym, p.T, p.r, policy(state)));
  label(state);
}

void BM_KernelFromSymbol(benchmark::State& state) {
  const ReactionDiffusionParams p{1.0, 1.0, 1.0, 1.0};
  const double dx = 0.05, L = 20.0;
  const auto sym = p.symbol_function(3.14159265358979323846 / dx, 801);
  const auto design = sweep_optimal_symbol(sym, p.T, p.r);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel_from_symbol(design, dx, L, KernelProvenance::numerical_opt, 0.0, policy(state)));
  }
  label(state);
}

void BM_ConvolutionCheck(benchmark::State& state) {
  const ReactionDiffusionParams p{1.0, 10.0, 1.0, 10.0};
  for (auto _ : state) benchmark::DoNotOptimize(rd_convolution_check(p, 0.05, 30.0, policy(state)));
  label(state);
}

void BM_MonteCarlo(benchmark::State& state) {
  const ScalarPlant plant{-1.0, 0.5, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(monte_carlo_variance(plant, 1.0, 0.01, 20.0, 1000, 7, policy(state)));
  }
  label(state);
}

void BM_CirculantDesign(benchmark::State& state) {
  std::vector<double> row(256, 0.0);
  row[0] = -2.0;
  row[1] = row[255] = 0.5;
  const CirculantSystem sys{row};
  for (auto _ : state) {
    benchmark::DoNotOptimize(design_gains(sys, 0.1, 1.0, GainMethod::numerical_opt, policy(state)));
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_RegionBoundaries)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SymbolSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelFromSymbol)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvolutionCheck)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CirculantDesign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
