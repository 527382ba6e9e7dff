#include <benchmark/benchmark.h>

#include "bellqft/analysis.hpp"
#include "bellqft/process.hpp"

using namespace bellqft;

namespace {

ModelSpec model(int n_sites) {
  ModelSpec spec{GridSpec(8.0, n_sites)};
  spec.n_max = 2;
  spec.coupling = 1.0;
  return spec;
}

void BM_BuildOperators(benchmark::State& state) {
  const ModelSpec spec = model(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_operators(spec));
  state.counters["dim"] = static_cast<double>(spec.space().dimension());
}
BENCHMARK(BM_BuildOperators)->Arg(8)->Arg(16)->Arg(32);

void BM_Eigendecomposition(benchmark::State& state) {
  const ModelSpec spec = model(static_cast<int>(state.range(0)));
  const OperatorBlocks ops = build_operators(spec);
  for (auto _ : state) benchmark::DoNotOptimize(SpectralPropagator(ops.total, ops.hbar));
}
BENCHMARK(BM_Eigendecomposition)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LatticeRates(benchmark::State& state) {
  const ModelSpec spec = model(static_cast<int>(state.range(0)));
  const AtomTable atoms(spec.space());
  const TransitionKernel kernel(spec, atoms);
  Rng rng(1);
  const FockVector psi = random_state(spec.space(), rng);
  const auto floors = node_floors(psi);
  RateKernelRow row;
  std::size_t id = 0;
  for (auto _ : state) {
    fill_rates(psi, floors, kernel, static_cast<int>(id), true, row);
    benchmark::DoNotOptimize(row.total_rate);
    id = (id + 1) % atoms.size();
  }
}
BENCHMARK(BM_LatticeRates)->Arg(8)->Arg(32);

void BM_Ensemble(benchmark::State& state) {
  const ModelSpec spec = model(16);
  const OperatorBlocks ops = build_operators(spec);
  ProcessSettings ps;
  ps.mode = state.range(0) == 0 ? ProcessMode::Lattice : ProcessMode::Continuum;
  ps.dt = 0.005;
  ps.t_final = 1.0;
  ps.sample_times = {1.0};
  const StateSeries mesh = process_mesh(FockVector::vacuum(spec.space()), ops, ps);
  const ProcessContext ctx(spec, mesh, ps);
  for (auto _ : state) benchmark::DoNotOptimize(run_ensemble(ctx, 1000, 7, 1));
  state.SetItemsProcessed(state.iterations() * 1000 * static_cast<long>(ctx.steps()));
}
BENCHMARK(BM_Ensemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
